use std::io::Write;

use nalgebra::DVector;

use super::{SimError, TimingStats};
use crate::geometry::Vec3;
use crate::kinematics::RobotModel;

/// Force terms of one logged pair for one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedForce {
    pub d: f64,
    pub active: bool,
    pub d_dot: f64,
    pub f_rep_i: f64,
    pub f_damp_i: f64,
    pub f_rep_j: f64,
    pub f_damp_j: f64,
    pub force_i: Vec3,
}

/// State at the start of a tick and everything computed during it.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub tau_imp: DVector<f64>,
    pub tau_rep: DVector<f64>,
    pub tau: DVector<f64>,
    pub x_ee: Vec3,
    pub xdot_ee: Vec3,
    pub x_ref: Vec3,
    pub min_d: f64,
    pub min_pair: Option<usize>,
    pub n_active: usize,
    pub tracked: Vec<TrackedForce>,
    /// Wall-clock time of kinematics plus field evaluation. Not part of the CSV.
    pub compute_ns: u64,
}

/// One field visit of a logged pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Episode {
    pub entry_tick: usize,
    pub exit_tick: Option<usize>,
    /// Approach speed `-ḋ` at entry.
    pub entry_speed: f64,
    /// Separation speed `ḋ` at exit.
    pub exit_speed: Option<f64>,
    pub ee_entry_speed: f64,
    pub ee_exit_speed: Option<f64>,
    pub min_d: f64,
}

/// All ticks of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub joint_names: Vec<String>,
    pub tracked: Vec<(String, String)>,
    pub records: Vec<TickRecord>,
}

impl RunLog {
    pub fn new(model: &RobotModel, tracked: Vec<(String, String)>) -> Self {
        Self { joint_names: model.joints.iter().map(|j| j.name.clone()).collect(), tracked, records: Vec::new() }
    }

    pub fn push(&mut self, r: TickRecord) {
        self.records.push(r);
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for prefix in ["q", "qd", "tau_imp", "tau_rep", "tau"] {
            h.extend(self.joint_names.iter().map(|j| format!("{prefix}_{j}")));
        }
        for prefix in ["x_ee", "xd_ee", "x_ref"] {
            h.extend(["x", "y", "z"].iter().map(|a| format!("{prefix}_{a}")));
        }
        h.push("min_d".into());
        h.push("n_active".into());
        for (a, b) in &self.tracked {
            for col in ["d", "active", "f_rep_i", "f_damp_i", "f_rep_j", "f_damp_j"] {
                h.push(format!("{a}__{b}_{col}"));
            }
        }
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        let mut row: Vec<String> = Vec::new();
        for r in &self.records {
            row.clear();
            row.push(r.t.to_string());
            for v in [&r.q, &r.qdot, &r.tau_imp, &r.tau_rep, &r.tau] {
                row.extend(v.iter().map(f64::to_string));
            }
            for v in [&r.x_ee, &r.xdot_ee, &r.x_ref] {
                row.extend(v.iter().map(f64::to_string));
            }
            row.push(r.min_d.to_string());
            row.push(r.n_active.to_string());
            for f in &r.tracked {
                row.push(f.d.to_string());
                row.push(u8::from(f.active).to_string());
                for x in [f.f_rep_i, f.f_damp_i, f.f_rep_j, f.f_damp_j] {
                    row.push(x.to_string());
                }
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn csv_bytes(&self) -> Result<Vec<u8>, SimError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }

    /// Field visits of tracked pair `k`, in order.
    pub fn episodes(&self, k: usize) -> Vec<Episode> {
        let mut out: Vec<Episode> = Vec::new();
        let mut was_active = false;
        for (tick, r) in self.records.iter().enumerate() {
            let f = &r.tracked[k];
            let speed = r.xdot_ee.norm();
            match (was_active, f.active) {
                (false, true) => out.push(Episode {
                    entry_tick: tick,
                    exit_tick: None,
                    entry_speed: -f.d_dot,
                    exit_speed: None,
                    ee_entry_speed: speed,
                    ee_exit_speed: None,
                    min_d: f.d,
                }),
                (true, false) => {
                    if let Some(e) = out.last_mut() {
                        e.exit_tick = Some(tick);
                        e.exit_speed = Some(f.d_dot);
                        e.ee_exit_speed = Some(speed);
                    }
                }
                (true, true) => {
                    if let Some(e) = out.last_mut() {
                        e.min_d = e.min_d.min(f.d);
                    }
                }
                (false, false) => {}
            }
            was_active = f.active;
        }
        out
    }

    pub fn min_tracked_d(&self, k: usize) -> f64 {
        self.records.iter().map(|r| r.tracked[k].d).fold(f64::INFINITY, f64::min)
    }

    /// Smallest surface distance over every enumerated pair.
    pub fn min_d(&self) -> f64 {
        self.records.iter().map(|r| r.min_d).fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_tau(&self) -> Vec<f64> {
        let n = self.joint_names.len();
        (0..n).map(|k| self.records.iter().map(|r| r.tau[k].abs()).fold(0.0, f64::max)).collect()
    }

    /// Largest per-tick torque change over each joint's rate budget.
    pub fn max_rate_ratio(&self, model: &RobotModel, dt: f64) -> f64 {
        self.records
            .windows(2)
            .flat_map(|w| {
                model.joints.iter().enumerate().map(move |(k, j)| (w[1].tau[k] - w[0].tau[k]).abs() / (j.torque_rate_limit * dt))
            })
            .fold(0.0, f64::max)
    }

    /// Largest per-tick torque change minus its budget; `≤ 1e-9` means the
    /// rate bound held.
    pub fn max_rate_excess(&self, model: &RobotModel, dt: f64) -> f64 {
        self.records
            .windows(2)
            .flat_map(|w| {
                model.joints.iter().enumerate().map(move |(k, j)| (w[1].tau[k] - w[0].tau[k]).abs() - j.torque_rate_limit * dt)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest distance of any joint to either limit (negative if violated).
    pub fn joint_limit_margin(&self, model: &RobotModel) -> f64 {
        self.records
            .iter()
            .flat_map(|r| model.joints.iter().enumerate().map(move |(k, j)| (r.q[k] - j.q_limit_low).min(j.q_limit_up - r.q[k])))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn timing(&self) -> TimingStats {
        let samples: Vec<f64> = self.records.iter().map(|r| r.compute_ns as f64 / 1e3).collect();
        TimingStats::from_samples(&samples)
    }
}
