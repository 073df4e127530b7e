//! Scripted experiments on the reference model. Parameters live in JSON
//! files under `scenarios/`; [`run_scenario`] executes one and checks its
//! invariants.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    benchmark_iteration, min_jerk, scaling_series, BaseHold, BenchReport, CartesianMove, ImpedanceGains, JointMove,
    LinearFit, Reference, RunLog, ScalingPoint, SimConfig, SimError, Simulation, TimingStats,
};
use crate::geometry::{PrimitiveSkeleton, Vec3};
use crate::kinematics::reference::{home_q, reference_environment, reference_model};
use crate::kinematics::{forward_kinematics, RobotModel};

pub const SCENARIO_IDS: [&str; 5] = ["self_collision", "damping_sweep", "joint_limit", "evasive_base", "pipeline_timing"];

/// Allowed penetration for damped runs and allowed joint-limit overshoot.
pub const PENETRATION_TOL: f64 = 1e-3;
pub const JOINT_LIMIT_TOL: f64 = 1e-3;
pub const RATE_TOL: f64 = 1e-9;
pub const SIGN_AGREEMENT_MIN: f64 = 0.95;

const BUILTIN: [(&str, &str); 5] = [
    ("self_collision", include_str!("../../scenarios/self_collision.json")),
    ("damping_sweep", include_str!("../../scenarios/damping_sweep.json")),
    ("joint_limit", include_str!("../../scenarios/joint_limit.json")),
    ("evasive_base", include_str!("../../scenarios/evasive_base.json")),
    ("pipeline_timing", include_str!("../../scenarios/pipeline_timing.json")),
];

/// Tool-point move; `null` components mean the start position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EeMoveSpec {
    pub t0: f64,
    pub duration: f64,
    pub target: [Option<f64>; 3],
}

/// Posture move; a `null` target means the initial value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointMoveSpec {
    pub t0: f64,
    pub duration: f64,
    pub joint: usize,
    pub target: Option<f64>,
}

/// Vertical capsule swept along y toward a robot body and back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub name: String,
    pub x: f64,
    pub z: f64,
    pub length: f64,
    pub radius: f64,
    pub y_far: f64,
    pub y_near: f64,
    /// `[t0, duration]` of the approach and the retreat.
    pub approach: [f64; 2],
    pub retreat: [f64; 2],
    /// Ticks between environment snapshot swaps.
    pub swap_every: usize,
    pub sides: Vec<f64>,
    /// Robot skeleton whose repelling force is compared with the base velocity.
    pub body: String,
}

impl ProbeSpec {
    pub fn y_at(&self, t: f64, side: f64) -> f64 {
        let (s_in, _) = min_jerk(t, self.approach[0], self.approach[1]);
        let (s_out, _) = min_jerk(t, self.retreat[0], self.retreat[1]);
        side * (self.y_far + (self.y_near - self.y_far) * (s_in - s_out))
    }

    pub fn skeleton(&self, t: f64, side: f64) -> Result<PrimitiveSkeleton, SimError> {
        PrimitiveSkeleton::line(
            self.name.clone(),
            Vec3::new(self.x, self.y_at(t, side), self.z),
            Vec3::new(0.0, 0.0, self.length),
            self.radius,
        )
        .map_err(|e| SimError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub repeats: usize,
    pub series_repeats: usize,
    pub sizes: Vec<usize>,
    pub mean_bound_us: f64,
    pub min_r2: f64,
    pub expected_pairs: usize,
}

/// Contents of one scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub duration: f64,
    /// Overrides of the home posture as `[joint, value]`.
    #[serde(default)]
    pub posture: Vec<(usize, f64)>,
    #[serde(default)]
    pub gains: Option<ImpedanceGains>,
    #[serde(default)]
    pub base_hold: Option<Vec<BaseHold>>,
    #[serde(default)]
    pub base_actuatable: bool,
    #[serde(default)]
    pub body_force_scale: BTreeMap<String, f64>,
    #[serde(default)]
    pub ee_moves: Vec<EeMoveSpec>,
    #[serde(default)]
    pub joint_moves: Vec<JointMoveSpec>,
    /// Damping constants to sweep; empty runs once at the configured value.
    #[serde(default)]
    pub zetas: Vec<f64>,
    #[serde(default)]
    pub tracked: Vec<(String, String)>,
    /// Tracks every robot pair against this world skeleton.
    #[serde(default)]
    pub track_against: Option<String>,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
    #[serde(default)]
    pub bench: Option<BenchSpec>,
}

impl ScenarioSpec {
    pub fn builtin(id: &str) -> Result<Self, SimError> {
        let (_, text) = BUILTIN.iter().find(|(k, _)| *k == id).ok_or_else(|| SimError::UnknownScenario(id.to_string()))?;
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, SimError> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn initial_posture(&self) -> Vec<f64> {
        let mut q = home_q();
        for &(k, v) in &self.posture {
            if k < q.len() {
                q[k] = v;
            }
        }
        q
    }

    fn reference(&self, x0: Vec3, q0: &[f64]) -> Reference {
        let mut r = Reference::hold(x0, q0.to_vec());
        r.ee = self
            .ee_moves
            .iter()
            .map(|m| {
                let t = [0, 1, 2].map(|a| m.target[a].unwrap_or(x0[a]));
                CartesianMove { t0: m.t0, duration: m.duration, target: t }
            })
            .collect();
        r.posture = self
            .joint_moves
            .iter()
            .map(|m| JointMove { t0: m.t0, duration: m.duration, joint: m.joint, target: m.target.unwrap_or(q0[m.joint]) })
            .collect();
        r
    }
}

/// Caller overrides for one scenario run.
#[derive(Debug, Clone, Default)]
pub struct ScenarioOptions {
    /// Replaces the reference world skeletons.
    pub env: Option<Vec<PrimitiveSkeleton>>,
    /// Restricts a sweep to one value, or sets ζ for single runs.
    pub zeta: Option<f64>,
    pub seed: u64,
    /// Overrides the benchmark repeat counts.
    pub bench_repeats: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Depends on wall-clock measurements; kept out of the summary.
    #[serde(skip)]
    pub timing: bool,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail, timing: false }
    }
}

/// Deterministic per-run numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub zeta: f64,
    pub ticks: usize,
    pub min_surface_distance: f64,
    pub min_tracked_distance: Option<f64>,
    pub colliding: bool,
    pub closest_tracked_pair: Option<String>,
    pub entry_speed: Option<f64>,
    pub exit_speed: Option<f64>,
    pub ee_entry_speed: Option<f64>,
    pub ee_exit_speed: Option<f64>,
    pub max_abs_tau: Vec<f64>,
    pub joint_limit_margin: f64,
    pub max_rate_ratio: f64,
    pub active_ticks: Option<usize>,
    pub sign_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub reference: BenchReport,
    pub series: Vec<ScalingPoint>,
    pub fit: LinearFit,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub id: String,
    pub runs: Vec<RunSummary>,
    pub logs: Vec<(String, RunLog)>,
    pub checks: Vec<Check>,
    /// Per-run compute time of the avoidance step.
    pub timing: Vec<(String, TimingStats)>,
    pub bench: Option<BenchSummary>,
    pub pairs: usize,
    pub skeletons: usize,
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    scenario: &'a str,
    passed: bool,
    pairs: usize,
    skeletons: usize,
    runs: &'a [RunSummary],
    checks: Vec<&'a Check>,
}

#[derive(Serialize)]
struct TimingDoc<'a> {
    scenario: &'a str,
    runs: BTreeMap<&'a str, TimingStats>,
    bench: Option<&'a BenchSummary>,
    checks: Vec<&'a Check>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn run(&self, label: &str) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.label == label)
    }

    pub fn log(&self, label: &str) -> Option<&RunLog> {
        self.logs.iter().find(|(l, _)| l == label).map(|(_, log)| log)
    }

    pub fn csv_name(&self, label: &str) -> String {
        if label.is_empty() {
            format!("{}.csv", self.id)
        } else {
            format!("{}_{label}.csv", self.id)
        }
    }

    /// Summary without wall-clock values; identical across repeated runs.
    pub fn summary_json(&self) -> Result<String, SimError> {
        let doc = SummaryDoc {
            scenario: &self.id,
            passed: self.checks.iter().filter(|c| !c.timing).all(|c| c.passed),
            pairs: self.pairs,
            skeletons: self.skeletons,
            runs: &self.runs,
            checks: self.checks.iter().filter(|c| !c.timing).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn timing_json(&self) -> Result<String, SimError> {
        let doc = TimingDoc {
            scenario: &self.id,
            runs: self.timing.iter().map(|(l, t)| (l.as_str(), *t)).collect(),
            bench: self.bench.as_ref(),
            checks: self.checks.iter().filter(|c| c.timing).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Writes one CSV per run plus `summary.json` and `timing.json`; returns
    /// the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>, SimError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (label, log) in &self.logs {
            let path = dir.join(self.csv_name(label));
            log.write_csv(fs::File::create(&path)?)?;
            written.push(path);
        }
        for (name, body) in [("summary.json", self.summary_json()?), ("timing.json", self.timing_json()?)] {
            let path = dir.join(name);
            fs::write(&path, body + "\n")?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn run_scenario(id: &str, opts: &ScenarioOptions) -> Result<ScenarioOutcome, SimError> {
    run_spec(&ScenarioSpec::builtin(id)?, opts)
}

pub fn run_spec(spec: &ScenarioSpec, opts: &ScenarioOptions) -> Result<ScenarioOutcome, SimError> {
    let mut model = reference_model();
    model.base_actuatable = spec.base_actuatable;
    let env = opts.env.clone().unwrap_or_else(reference_environment);
    match spec.id.as_str() {
        "pipeline_timing" => pipeline_timing(spec, &model, &env, opts),
        "evasive_base" => evasive_base(spec, &model, &env, opts),
        "self_collision" | "damping_sweep" | "joint_limit" => tracking_runs(spec, &model, &env, opts),
        other => Err(SimError::UnknownScenario(other.to_string())),
    }
}

fn base_config(spec: &ScenarioSpec, opts: &ScenarioOptions) -> SimConfig {
    let mut cfg = SimConfig { duration: spec.duration, seed: opts.seed, tracked: spec.tracked.clone(), ..SimConfig::default() };
    if let Some(g) = spec.gains {
        cfg.gains = g;
    }
    if let Some(h) = &spec.base_hold {
        cfg.base_hold = h.clone();
    }
    cfg.apf.body_force_scale = spec.body_force_scale.clone();
    if let Some(z) = opts.zeta {
        cfg.apf.zeta = z;
    }
    cfg
}

struct Prepared {
    q0: Vec<f64>,
    reference: Reference,
}

fn prepare(spec: &ScenarioSpec, model: &RobotModel) -> Result<Prepared, SimError> {
    let q0 = spec.initial_posture();
    let kin = forward_kinematics(model, &q0)?;
    let reference = spec.reference(kin.tcp(model), &q0);
    Ok(Prepared { q0, reference })
}

fn tracked_against(model: &RobotModel, env: &[PrimitiveSkeleton], cfg: &SimConfig, world: &str) -> Result<Vec<(String, String)>, SimError> {
    let field = crate::apf::AvoidanceField::new(model, env, &cfg.apf)?;
    let pairs: Vec<(String, String)> = field
        .pairs()
        .iter()
        .filter(|p| p.name_j == world && p.i < field.robot_count())
        .map(|p| (p.name_i.clone(), p.name_j.clone()))
        .collect();
    if pairs.is_empty() {
        return Err(SimError::UnknownPair("<robot>".into(), world.to_string()));
    }
    Ok(pairs)
}

fn summarize(label: &str, zeta: f64, log: &RunLog, model: &RobotModel, dt: f64) -> RunSummary {
    let closest = (0..log.tracked.len()).min_by(|&a, &b| log.min_tracked_d(a).total_cmp(&log.min_tracked_d(b)));
    let min_tracked = closest.map(|k| log.min_tracked_d(k));
    // the visit in which the closest pair came nearest
    let episode = closest.and_then(|k| log.episodes(k).into_iter().min_by(|a, b| a.min_d.total_cmp(&b.min_d)));
    RunSummary {
        label: label.to_string(),
        zeta,
        ticks: log.records.len(),
        min_surface_distance: log.min_d(),
        min_tracked_distance: min_tracked,
        colliding: min_tracked.is_some_and(|d| d < 0.0),
        closest_tracked_pair: closest.map(|k| format!("{}/{}", log.tracked[k].0, log.tracked[k].1)),
        entry_speed: episode.map(|e| e.entry_speed),
        exit_speed: episode.and_then(|e| e.exit_speed),
        ee_entry_speed: episode.map(|e| e.ee_entry_speed),
        ee_exit_speed: episode.and_then(|e| e.ee_exit_speed),
        max_abs_tau: log.max_abs_tau(),
        joint_limit_margin: log.joint_limit_margin(model),
        max_rate_ratio: log.max_rate_ratio(model, dt),
        active_ticks: None,
        sign_agreement: None,
    }
}

fn zeta_label(z: f64) -> String {
    format!("zeta_{z}")
}

fn common_checks(checks: &mut Vec<Check>, label: &str, log: &RunLog, model: &RobotModel, dt: f64) {
    let margin = log.joint_limit_margin(model);
    checks.push(Check::new(
        format!("{label}joint limits"),
        margin >= -JOINT_LIMIT_TOL,
        format!("smallest margin {margin:.6} rad/m"),
    ));
    let excess = log.max_rate_excess(model, dt);
    checks.push(Check::new(
        format!("{label}torque continuity"),
        excess <= RATE_TOL,
        format!("largest per-tick change over budget {excess:.3e} N·m"),
    ));
}

fn tracking_runs(
    spec: &ScenarioSpec,
    model: &RobotModel,
    env: &[PrimitiveSkeleton],
    opts: &ScenarioOptions,
) -> Result<ScenarioOutcome, SimError> {
    let prepared = prepare(spec, model)?;
    let mut cfg = base_config(spec, opts);
    if let Some(world) = &spec.track_against {
        cfg.tracked.extend(tracked_against(model, env, &cfg, world)?);
    }
    let zetas: Vec<f64> = match (opts.zeta, spec.zetas.is_empty()) {
        (Some(z), _) => vec![z],
        (None, true) => vec![cfg.apf.zeta],
        (None, false) => spec.zetas.clone(),
    };
    let sweep = !spec.zetas.is_empty();
    let mut out = empty_outcome(spec);
    for &zeta in &zetas {
        let mut run_cfg = cfg.clone();
        run_cfg.apf.zeta = zeta;
        let mut sim = Simulation::new(model.clone(), env, run_cfg, prepared.reference.clone(), &prepared.q0)?;
        out.pairs = sim.field().pairs().len();
        out.skeletons = sim.field().skeletons().len();
        let log = sim.run()?;
        let label = if sweep { zeta_label(zeta) } else { String::new() };
        let summary = summarize(&label, zeta, &log, model, cfg.dt);
        let prefix = if sweep { format!("{label}: ") } else { String::new() };
        scenario_checks(spec, zeta, &summary, &prefix, &mut out.checks);
        common_checks(&mut out.checks, &prefix, &log, model, cfg.dt);
        out.timing.push((label.clone(), log.timing()));
        out.runs.push(summary);
        out.logs.push((label, log));
    }
    Ok(out)
}

fn scenario_checks(spec: &ScenarioSpec, zeta: f64, s: &RunSummary, prefix: &str, checks: &mut Vec<Check>) {
    let slower = |s: &RunSummary| match (s.entry_speed, s.exit_speed) {
        (Some(a), Some(b)) => (b < a, format!("entry {a:.4} m/s, exit {b:.4} m/s")),
        (Some(a), None) => (false, format!("entry {a:.4} m/s, never left the field")),
        _ => (false, "never entered the field".to_string()),
    };
    let tracked = s.min_tracked_distance.unwrap_or(f64::INFINITY);
    match spec.id.as_str() {
        "self_collision" => {
            let (ok, detail) = slower(s);
            checks.push(Check::new("exit slower than entry", ok, detail));
            checks.push(Check::new("no self contact", tracked > 0.0, format!("min tracked d {tracked:.5} m")));
            checks.push(no_tunneling(prefix, s));
        }
        "damping_sweep" => {
            if zeta == 0.0 {
                checks.push(Check::new(
                    format!("{prefix}undamped run reaches the wall"),
                    tracked < 0.0,
                    format!("min wall d {tracked:.5} m"),
                ));
            } else {
                checks.push(Check::new(
                    format!("{prefix}wall never reached"),
                    tracked > 0.0,
                    format!("min wall d {tracked:.5} m"),
                ));
            }
            if zeta >= 0.05 {
                checks.push(no_tunneling(prefix, s));
            }
            if (zeta - 0.2).abs() < 1e-12 {
                let (ok, detail) = slower(s);
                checks.push(Check::new(format!("{prefix}exit slower than entry"), ok, detail));
            }
        }
        _ => checks.push(no_tunneling(prefix, s)),
    }
}

fn no_tunneling(prefix: &str, s: &RunSummary) -> Check {
    Check::new(
        format!("{prefix}no penetration"),
        s.min_surface_distance > -PENETRATION_TOL,
        format!("min surface d over all pairs {:.5} m", s.min_surface_distance),
    )
}

fn empty_outcome(spec: &ScenarioSpec) -> ScenarioOutcome {
    ScenarioOutcome {
        id: spec.id.clone(),
        runs: Vec::new(),
        logs: Vec::new(),
        checks: Vec::new(),
        timing: Vec::new(),
        bench: None,
        pairs: 0,
        skeletons: 0,
    }
}

fn evasive_base(
    spec: &ScenarioSpec,
    model: &RobotModel,
    env: &[PrimitiveSkeleton],
    opts: &ScenarioOptions,
) -> Result<ScenarioOutcome, SimError> {
    let probe = spec.probe.as_ref().ok_or_else(|| SimError::InvalidConfig("evasive_base needs a probe".into()))?;
    if model.base_joints == 0 || !model.base_actuatable {
        return Err(SimError::InvalidConfig("evasive_base needs an actuatable base".into()));
    }
    let prepared = prepare(spec, model)?;
    let mut cfg = base_config(spec, opts);
    cfg.tracked.push((probe.body.clone(), probe.name.clone()));
    let k_track = cfg.tracked.len() - 1;
    // the first base joint is prismatic; its axis is constant
    let axis = forward_kinematics(model, &prepared.q0)?.joint_axis(0).0;
    let env_at = |t: f64, side: f64| -> Result<Vec<PrimitiveSkeleton>, SimError> {
        let mut e = env.to_vec();
        e.push(probe.skeleton(t, side)?);
        Ok(e)
    };
    let mut out = empty_outcome(spec);
    for &side in &probe.sides {
        let label = if side >= 0.0 { "pos" } else { "neg" }.to_string();
        let mut sim = Simulation::new(model.clone(), &env_at(0.0, side)?, cfg.clone(), prepared.reference.clone(), &prepared.q0)?;
        let k_pair = sim.field().pair_index(&probe.body, &probe.name).expect("tracked pair resolved");
        let body_is_i = sim.field().pairs()[k_pair].name_i == probe.body;
        out.pairs = sim.field().pairs().len();
        out.skeletons = sim.field().skeletons().len();
        let every = probe.swap_every.max(1) as u64;
        let mut tick = 0u64;
        let log = sim.run_with(|s| {
            if tick % every == 0 && tick > 0 {
                s.set_environment(&env_at(s.state().t, side)?)?;
            }
            tick += 1;
            Ok(())
        })?;
        let (mut active, mut agree) = (0usize, 0usize);
        for r in &log.records {
            let f = &r.tracked[k_track];
            if !f.active {
                continue;
            }
            active += 1;
            let force = if body_is_i { f.force_i } else { -f.force_i };
            let v_base = r.qdot[0];
            let f_base = force.dot(&axis);
            if v_base != 0.0 && f_base != 0.0 && v_base.signum() == f_base.signum() {
                agree += 1;
            }
        }
        let ratio = if active > 0 { agree as f64 / active as f64 } else { 0.0 };
        let mut summary = summarize(&label, cfg.apf.zeta, &log, model, cfg.dt);
        summary.active_ticks = Some(active);
        summary.sign_agreement = Some(ratio);
        out.checks.push(Check::new(
            format!("{label}: base velocity follows the repelling force"),
            ratio > SIGN_AGREEMENT_MIN,
            format!("{agree} of {active} active ticks agree ({:.2} %)", 100.0 * ratio),
        ));
        out.checks.push(no_tunneling(&format!("{label}: "), &summary));
        common_checks(&mut out.checks, &format!("{label}: "), &log, model, cfg.dt);
        out.timing.push((label.clone(), log.timing()));
        out.runs.push(summary);
        out.logs.push((label, log));
    }
    Ok(out)
}

fn pipeline_timing(
    spec: &ScenarioSpec,
    model: &RobotModel,
    env: &[PrimitiveSkeleton],
    opts: &ScenarioOptions,
) -> Result<ScenarioOutcome, SimError> {
    let bench = spec.bench.as_ref().ok_or_else(|| SimError::InvalidConfig("pipeline_timing needs bench settings".into()))?;
    let cfg = base_config(spec, opts);
    let q = spec.initial_posture();
    let repeats = opts.bench_repeats.unwrap_or(bench.repeats).max(10);
    let series_repeats = opts.bench_repeats.unwrap_or(bench.series_repeats).max(10);
    let reference = benchmark_iteration(model, env, &q, repeats, &cfg.apf)?;
    let (series, fit) = scaling_series(model, &q, &bench.sizes, series_repeats, opts.seed, &cfg.apf)?;
    let mut out = empty_outcome(spec);
    out.pairs = reference.pairs;
    out.skeletons = reference.skeletons;
    out.checks.push(Check::new(
        "reference scene pair count",
        reference.pairs == bench.expected_pairs,
        format!("{} pairs, expected {}", reference.pairs, bench.expected_pairs),
    ));
    out.checks.push(Check {
        timing: true,
        ..Check::new(
            "mean iteration time",
            reference.total.mean_us <= bench.mean_bound_us,
            format!("{:.2} us (bound {} us)", reference.total.mean_us, bench.mean_bound_us),
        )
    });
    out.checks.push(Check {
        timing: true,
        ..Check::new("linear growth", fit.r2 > bench.min_r2, format!("R² {:.4}, slope {:.4} us/skeleton", fit.r2, fit.slope))
    });
    out.bench = Some(BenchSummary { reference, series, fit });
    Ok(out)
}
