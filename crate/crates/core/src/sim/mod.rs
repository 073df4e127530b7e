//! Fixed-step control-loop simulator: impedance control plus the avoidance
//! field, lumped-mass dynamics without Coriolis terms, semi-implicit Euler.

mod bench;
mod record;
pub mod scenarios;

pub use bench::{
    benchmark_iteration, linear_fit, random_environment, scaling_series, BenchReport, LinearFit, ScalingPoint, TimingStats,
};
pub use record::{Episode, RunLog, TickRecord, TrackedForce};
pub use scenarios::{run_scenario, ScenarioOptions, ScenarioOutcome, ScenarioSpec, SCENARIO_IDS};

use std::time::Instant;

use nalgebra::{DVector, Matrix3, Matrix3xX};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apf::{ApfConfig, ApfError, AvoidanceField, InertiaCache, TorqueLimiter};
use crate::geometry::{PrimitiveSkeleton, Vec3};
use crate::kinematics::{forward_kinematics, gravity_torques, JointKind, Kinematics, KinematicsError, RobotModel};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("numerical divergence at t = {t:.4} s: |qdot| = {norm:.3e}")]
    NumericalDivergence { t: f64, norm: f64 },
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("unknown pair {0} / {1}")]
    UnknownPair(String, String),
    #[error(transparent)]
    Apf(#[from] ApfError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Cartesian PD on the tool point plus a joint-space posture term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceGains {
    pub k_x: [f64; 3],
    pub d_x: [f64; 3],
    pub k_null: f64,
    pub d_null: f64,
}

impl Default for ImpedanceGains {
    fn default() -> Self {
        Self { k_x: [400.0; 3], d_x: [40.0; 3], k_null: 10.0, d_null: 2.0 }
    }
}

impl ImpedanceGains {
    pub fn zero() -> Self {
        Self { k_x: [0.0; 3], d_x: [0.0; 3], k_null: 0.0, d_null: 0.0 }
    }

    fn cartesian(&self) -> bool {
        self.k_x.iter().chain(&self.d_x).any(|&g| g != 0.0)
    }
}

/// Position hold for one actuated base joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseHold {
    pub k: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub gravity: Vec3,
    pub gains: ImpedanceGains,
    /// One entry per base joint; used only while the base is actuatable.
    pub base_hold: Vec<BaseHold>,
    pub apf: ApfConfig,
    /// Divergence bound on `|qdot|`.
    pub max_qdot: f64,
    pub seed: u64,
    /// Pairs whose forces are logged every tick.
    pub tracked: Vec<(String, String)>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            duration: 1.0,
            gravity: Vec3::new(0.0, 0.0, -9.81),
            gains: ImpedanceGains::default(),
            base_hold: vec![BaseHold { k: 0.0, d: 2000.0 }, BaseHold { k: 2e4, d: 2000.0 }],
            apf: ApfConfig::default(),
            max_qdot: 50.0,
            seed: 0,
            tracked: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.duration >= 0.0) {
            return bad("duration must be non-negative");
        }
        let g = &self.gains;
        if g.k_x.iter().chain(&g.d_x).chain([&g.k_null, &g.d_null]).any(|&x| !(x >= 0.0)) {
            return bad("gains must be non-negative");
        }
        if self.base_hold.iter().any(|h| !(h.k >= 0.0 && h.d >= 0.0)) {
            return bad("base hold gains must be non-negative");
        }
        if !(self.max_qdot > 0.0) {
            return bad("max_qdot must be positive");
        }
        self.apf.validate()?;
        Ok(())
    }

    pub fn ticks(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Minimum-jerk blend `s(τ)` and its time derivative for a move of length `t_move`.
pub fn min_jerk(t: f64, t0: f64, t_move: f64) -> (f64, f64) {
    if t_move <= 0.0 || t >= t0 + t_move {
        return (1.0, 0.0);
    }
    if t <= t0 {
        return (0.0, 0.0);
    }
    let u = (t - t0) / t_move;
    let s = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    let ds = 30.0 * u * u * (1.0 - u) * (1.0 - u) / t_move;
    (s, ds)
}

/// Point-to-point move of the tool point starting at `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianMove {
    pub t0: f64,
    pub duration: f64,
    pub target: [f64; 3],
}

/// Point-to-point move of one posture coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointMove {
    pub t0: f64,
    pub duration: f64,
    pub joint: usize,
    pub target: f64,
}

/// Reference trajectories: chained minimum-jerk moves from `x0` and `q0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x0: Vec3,
    pub q0: Vec<f64>,
    pub ee: Vec<CartesianMove>,
    pub posture: Vec<JointMove>,
}

impl Reference {
    /// Holds `x0` and `q0` forever.
    pub fn hold(x0: Vec3, q0: Vec<f64>) -> Self {
        Self { x0, q0, ee: Vec::new(), posture: Vec::new() }
    }

    pub fn ee_at(&self, t: f64) -> (Vec3, Vec3) {
        let mut start = self.x0;
        for m in &self.ee {
            let target = Vec3::from(m.target);
            let (s, ds) = min_jerk(t, m.t0, m.duration);
            if s < 1.0 {
                return (start + (target - start) * s, (target - start) * ds);
            }
            start = target;
        }
        (start, Vec3::zeros())
    }

    pub fn posture_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let mut q = self.q0.clone();
        let mut v = vec![0.0; q.len()];
        let mut settled = vec![false; q.len()];
        for m in &self.posture {
            if settled[m.joint] {
                continue;
            }
            let (s, ds) = min_jerk(t, m.t0, m.duration);
            let step = m.target - q[m.joint];
            if s < 1.0 {
                q[m.joint] += step * s;
                v[m.joint] = step * ds;
                settled[m.joint] = true;
            } else {
                q[m.joint] = m.target;
            }
        }
        (q, v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
}

/// Impedance torque for the current state. Base columns are excluded from
/// the Cartesian task; actuated base joints get their own hold term.
#[allow(clippy::too_many_arguments)]
pub fn impedance_torque(
    model: &RobotModel,
    jac: &Matrix3xX<f64>,
    x: &Vec3,
    xdot: &Vec3,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    reference: &Reference,
    t: f64,
    gains: &ImpedanceGains,
    base_hold: &[BaseHold],
) -> DVector<f64> {
    let n = model.n_joints();
    let nb = model.base_joints;
    let mut ja = jac.clone();
    for k in 0..nb {
        ja.column_mut(k).fill(0.0);
    }
    let (x_ref, v_ref) = reference.ee_at(t);
    let kx = Matrix3::from_diagonal(&Vec3::from(gains.k_x));
    let dx = Matrix3::from_diagonal(&Vec3::from(gains.d_x));
    let force = kx * (x_ref - x) + dx * (v_ref - xdot);
    let mut tau = ja.tr_mul(&force);

    let (q_ref, qd_ref) = reference.posture_at(t);
    let mut posture = DVector::zeros(n);
    for k in nb..n {
        posture[k] = gains.k_null * (q_ref[k] - q[k]) + gains.d_null * (qd_ref[k] - qdot[k]);
    }
    if gains.cartesian() {
        // N = I - Jᵀ (J Jᵀ + λI)⁻¹ J
        let jjt = &ja * ja.transpose() + Matrix3::identity() * 1e-6;
        if let Some(inv) = jjt.try_inverse() {
            let proj = ja.transpose() * (inv * (&ja * &posture));
            posture -= proj;
        }
    }
    tau += posture;

    if model.base_actuatable {
        for k in 0..nb {
            let h = base_hold.get(k).copied().unwrap_or(BaseHold { k: 0.0, d: 0.0 });
            tau[k] = h.k * (reference.q0[k] - q[k]) - h.d * qdot[k];
        }
    }
    tau
}

/// One simulated robot in one environment.
#[derive(Debug, Clone)]
pub struct Simulation {
    model: RobotModel,
    cfg: SimConfig,
    reference: Reference,
    field: AvoidanceField,
    limiter: TorqueLimiter,
    state: SimState,
    tracked: Vec<usize>,
    tick: u64,
}

impl Simulation {
    pub fn new(
        model: RobotModel,
        env: &[PrimitiveSkeleton],
        cfg: SimConfig,
        reference: Reference,
        q0: &[f64],
    ) -> Result<Self, SimError> {
        cfg.validate()?;
        model.validate()?;
        model.check_q(q0)?;
        if reference.q0.len() != q0.len() {
            return Err(SimError::InvalidConfig("reference posture has the wrong length".into()));
        }
        let field = AvoidanceField::new(&model, env, &cfg.apf)?;
        let n = model.n_joints();
        let limiter = TorqueLimiter::new(&model);
        let mut sim = Self {
            state: SimState { t: 0.0, q: DVector::from_column_slice(q0), qdot: DVector::zeros(n) },
            model,
            cfg,
            reference,
            field,
            limiter,
            tracked: Vec::new(),
            tick: 0,
        };
        sim.resolve_tracked()?;
        Ok(sim)
    }

    fn resolve_tracked(&mut self) -> Result<(), SimError> {
        self.tracked = self
            .cfg
            .tracked
            .iter()
            .map(|(a, b)| self.field.pair_index(a, b).ok_or_else(|| SimError::UnknownPair(a.clone(), b.clone())))
            .collect::<Result<_, _>>()?;
        Ok(())
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn field(&self) -> &AvoidanceField {
        &self.field
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    /// Names of the logged pairs, in their resolved orientation.
    pub fn tracked_names(&self) -> Vec<(String, String)> {
        self.tracked.iter().map(|&k| (self.field.pairs()[k].name_i.clone(), self.field.pairs()[k].name_j.clone())).collect()
    }

    /// Swaps the environment; only legal between ticks, which `&mut self`
    /// guarantees.
    /// Overrides the joint velocities before the next tick.
    pub fn set_velocity(&mut self, qdot: &[f64]) -> Result<(), SimError> {
        self.model.check_q(qdot)?;
        self.state.qdot = DVector::from_column_slice(qdot);
        Ok(())
    }

    pub fn set_environment(&mut self, env: &[PrimitiveSkeleton]) -> Result<(), SimError> {
        self.field.set_environment(&self.model, env, &self.cfg.apf)?;
        self.resolve_tracked()
    }

    /// Advances one tick: kinematics, distances, repelling and damping
    /// forces, torque sum and limiting, then integration.
    pub fn step(&mut self) -> Result<TickRecord, SimError> {
        let dt = self.cfg.dt;
        let n = self.model.n_joints();
        let t = self.state.t;
        let started = Instant::now();

        let kin = forward_kinematics(&self.model, self.state.q.as_slice())?;
        let inertia = InertiaCache::new(&self.model, &kin)?;
        let out = self.field.evaluate(
            &self.model,
            &kin,
            self.state.q.as_slice(),
            self.state.qdot.as_slice(),
            &inertia,
            dt,
            &self.cfg.apf,
        );
        let tau_rep = out.tau_rep.clone();
        let compute_ns = started.elapsed().as_nanos() as u64;

        let x = kin.tcp(&self.model);
        let jac = tool_jacobian(&self.model, &kin, &x);
        let xdot = &jac * &self.state.qdot;
        let g = gravity_torques(&self.model, &kin, &self.cfg.gravity);
        let mut tau_imp = impedance_torque(
            &self.model,
            &jac,
            &x,
            &xdot,
            &self.state.q,
            &self.state.qdot,
            &self.reference,
            t,
            &self.cfg.gains,
            &self.cfg.base_hold,
        );
        tau_imp += &g;
        for k in (0..n).filter(|&k| !self.model.joint_active(k)) {
            tau_imp[k] = 0.0;
        }
        let tau = self.limiter.apply(&(&tau_imp + &tau_rep), dt);

        let mut qddot = inertia.chol.solve(&(&tau - &g));
        for k in (0..n).filter(|&k| !self.model.joint_active(k)) {
            qddot[k] = 0.0;
        }

        let out = self.field.output();
        let pairs = self.field.pairs();
        let tracked = self
            .tracked
            .iter()
            .map(|&k| {
                let f = out.forces[k];
                TrackedForce {
                    d: f.d,
                    active: f.active,
                    d_dot: pairs[k].d_dot,
                    f_rep_i: f.f_rep_i,
                    f_damp_i: f.f_damp_i,
                    f_rep_j: f.f_rep_j,
                    f_damp_j: f.f_damp_j,
                    force_i: f.force_i,
                }
            })
            .collect();
        let (x_ref, _) = self.reference.ee_at(t);
        let record = TickRecord {
            t,
            q: self.state.q.clone(),
            qdot: self.state.qdot.clone(),
            tau_imp,
            tau_rep,
            tau: tau.clone(),
            x_ee: x,
            xdot_ee: xdot,
            x_ref,
            min_d: out.min_d,
            min_pair: out.min_pair,
            n_active: out.n_active,
            tracked,
            compute_ns,
        };

        self.state.qdot += qddot * dt;
        let q_prev = self.state.q.clone();
        self.state.q += &self.state.qdot * dt;
        self.tick += 1;
        self.state.t = self.tick as f64 * dt;
        let norm = self.state.qdot.norm();
        if !(norm <= self.cfg.max_qdot) || self.state.q.iter().any(|x| !x.is_finite()) {
            self.state.q = q_prev;
            return Err(SimError::NumericalDivergence { t: self.state.t, norm });
        }
        Ok(record)
    }

    /// Runs `cfg.ticks()` ticks, calling `between` before each one so the
    /// caller can swap environments.
    pub fn run_with<F>(&mut self, mut between: F) -> Result<RunLog, SimError>
    where
        F: FnMut(&mut Simulation) -> Result<(), SimError>,
    {
        let ticks = self.cfg.ticks();
        let mut log = RunLog::new(&self.model, self.tracked_names());
        for _ in 0..ticks {
            between(self)?;
            log.push(self.step()?);
        }
        Ok(log)
    }

    pub fn run(&mut self) -> Result<RunLog, SimError> {
        self.run_with(|_| Ok(()))
    }
}

/// Tool-point Jacobian over every joint, locked or not, so that `J q̇` is
/// the true tool velocity.
fn tool_jacobian(model: &RobotModel, kin: &Kinematics, x: &Vec3) -> Matrix3xX<f64> {
    let n = model.n_joints();
    let mut j = Matrix3xX::zeros(n);
    for k in 0..n {
        let (z, o) = kin.joint_axis(k);
        let col = match model.joints[k].kind {
            JointKind::Revolute => z.cross(&(x - o)),
            JointKind::Prismatic => z,
        };
        j.set_column(k, &col);
    }
    j
}
