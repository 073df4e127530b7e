use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DVector, Matrix3xX};

use super::{
    acting_points, clamp_to_limits, damping_coefficient, joint_limit_torques, repelling_force, stiffness, ApfConfig,
    ApfError, InertiaCache,
};
use crate::geometry::{closest_unchecked, DistanceResult, PrimitiveSkeleton, Shape, Vec3};
use crate::kinematics::{Kinematics, RobotModel};

/// A pair leaves the field once `d` exceeds its latched threshold by this much.
pub const EXIT_HYSTERESIS: f64 = 1e-4;

/// Field membership of one enumerated pair across ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub i: usize,
    pub j: usize,
    pub name_i: String,
    pub name_j: String,
    pub active: bool,
    pub d_th_eff: f64,
    pub last: Option<DistanceResult>,
    /// Finite-difference rate of `d` over the last tick.
    pub d_dot: f64,
    /// `d_dot` at the most recent field entry and exit.
    pub entry_rate: Option<f64>,
    pub exit_rate: Option<f64>,
}

impl PairState {
    pub fn new(i: usize, j: usize, name_i: &str, name_j: &str, d_th: f64) -> Self {
        Self {
            i,
            j,
            name_i: name_i.to_string(),
            name_j: name_j.to_string(),
            active: false,
            d_th_eff: d_th,
            last: None,
            d_dot: 0.0,
            entry_rate: None,
            exit_rate: None,
        }
    }

    pub fn distance(&self) -> Option<f64> {
        self.last.map(|r| r.surface_distance)
    }

    /// Records a new distance and updates the entry latch.
    pub fn observe(&mut self, dr: DistanceResult, dt: f64, cfg: &ApfConfig) {
        let d = dr.surface_distance;
        self.d_dot = match self.last {
            Some(prev) if dt > 0.0 => (d - prev.surface_distance) / dt,
            _ => 0.0,
        };
        self.last = Some(dr);
        if self.active {
            if d > self.d_th_eff + EXIT_HYSTERESIS {
                self.active = false;
                self.exit_rate = Some(self.d_dot);
                self.d_th_eff = cfg.entry_threshold(0.0);
            }
        } else {
            let candidate = cfg.entry_threshold(self.d_dot);
            if d < candidate {
                self.active = true;
                self.d_th_eff = candidate;
                self.entry_rate = Some(self.d_dot);
            } else {
                self.d_th_eff = cfg.entry_threshold(0.0);
            }
        }
    }
}

/// Index pairs that can interact: different frames, not both world-fixed,
/// not on either ignore list. A robot body always comes first.
pub fn enumerate_pairs(skeletons: &[PrimitiveSkeleton]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..skeletons.len() {
        for j in i + 1..skeletons.len() {
            let (a, b) = (&skeletons[i], &skeletons[j]);
            if a.frame_id == b.frame_id || a.ignores(&b.name) || b.ignores(&a.name) {
                continue;
            }
            if a.is_world_fixed() {
                out.push((j, i));
            } else {
                out.push((i, j));
            }
        }
    }
    out
}

/// `n(n-1)/2 - m`.
pub fn count_pairs(n: usize, excluded: usize) -> usize {
    n * n.saturating_sub(1) / 2 - excluded
}

/// Force terms of one pair for one tick. The `_i` terms act on the first
/// body, the `_j` terms on the second (zero for world-fixed bodies).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairForce {
    pub d: f64,
    pub active: bool,
    pub f_rep_i: f64,
    pub f_damp_i: f64,
    pub f_rep_j: f64,
    pub f_damp_j: f64,
    /// Repelling force on `i` along world axes, scaled.
    pub force_i: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldOutput {
    /// Pair and joint-limit torques, clamped to the joint torque limits.
    pub tau_rep: DVector<f64>,
    pub tau_pairs: DVector<f64>,
    pub tau_joint_limits: DVector<f64>,
    /// Aligned with the field's pair list.
    pub forces: Vec<PairForce>,
    pub min_d: f64,
    pub min_pair: Option<usize>,
    pub n_active: usize,
}

impl FieldOutput {
    fn new(n: usize) -> Self {
        Self {
            tau_rep: DVector::zeros(n),
            tau_pairs: DVector::zeros(n),
            tau_joint_limits: DVector::zeros(n),
            forces: Vec::new(),
            min_d: f64::INFINITY,
            min_pair: None,
            n_active: 0,
        }
    }
}

/// Robot and environment skeletons with per-pair field state; evaluated
/// once per control tick.
#[derive(Debug, Clone)]
pub struct AvoidanceField {
    skeletons: Vec<PrimitiveSkeleton>,
    n_robot: usize,
    scales: Vec<f64>,
    world: Vec<Shape>,
    pairs: Vec<PairState>,
    excluded: usize,
    out: FieldOutput,
    jac: Matrix3xX<f64>,
}

impl AvoidanceField {
    pub fn new(model: &RobotModel, env: &[PrimitiveSkeleton], cfg: &ApfConfig) -> Result<Self, ApfError> {
        cfg.validate()?;
        let n = model.n_joints();
        let mut field = Self {
            skeletons: Vec::new(),
            n_robot: model.link_skeletons.len(),
            scales: Vec::new(),
            world: Vec::new(),
            pairs: Vec::new(),
            excluded: 0,
            out: FieldOutput::new(n),
            jac: Matrix3xX::zeros(n),
        };
        field.set_environment(model, env, cfg)?;
        Ok(field)
    }

    /// Replaces the environment between ticks. Pairs present before and after
    /// keep their field state.
    pub fn set_environment(&mut self, model: &RobotModel, env: &[PrimitiveSkeleton], cfg: &ApfConfig) -> Result<(), ApfError> {
        let mut skeletons = model.link_skeletons.clone();
        skeletons.extend_from_slice(env);
        let mut names = BTreeSet::new();
        for s in &skeletons {
            model.check_frame(s.frame_id)?;
            if !names.insert(s.name.as_str()) {
                return Err(ApfError::InvalidConfig(format!("duplicate skeleton name {}", s.name)));
            }
        }
        let mut previous: BTreeMap<(String, String), PairState> =
            self.pairs.drain(..).map(|p| ((p.name_i.clone(), p.name_j.clone()), p)).collect();
        let idx = enumerate_pairs(&skeletons);
        let n = skeletons.len();
        self.excluded = n * n.saturating_sub(1) / 2 - idx.len();
        self.pairs = idx
            .into_iter()
            .map(|(i, j)| {
                let (a, b) = (&skeletons[i].name, &skeletons[j].name);
                match previous.remove(&(a.clone(), b.clone())) {
                    Some(p) => PairState { i, j, ..p },
                    None => PairState::new(i, j, a, b, cfg.entry_threshold(0.0)),
                }
            })
            .collect();
        self.scales = skeletons.iter().map(|s| cfg.scale_of(&s.name)).collect();
        self.world = skeletons.iter().map(|s| s.shape).collect();
        self.out.forces = vec![PairForce::default(); self.pairs.len()];
        self.skeletons = skeletons;
        Ok(())
    }

    pub fn skeletons(&self) -> &[PrimitiveSkeleton] {
        &self.skeletons
    }

    pub fn robot_count(&self) -> usize {
        self.n_robot
    }

    pub fn pairs(&self) -> &[PairState] {
        &self.pairs
    }

    /// Structurally excluded pairs `m`.
    pub fn excluded_count(&self) -> usize {
        self.excluded
    }

    pub fn pair_index(&self, a: &str, b: &str) -> Option<usize> {
        self.pairs
            .iter()
            .position(|p| (p.name_i == a && p.name_j == b) || (p.name_i == b && p.name_j == a))
    }

    /// World-frame shapes from the last evaluation.
    pub fn world_shapes(&self) -> &[Shape] {
        &self.world
    }

    pub fn output(&self) -> &FieldOutput {
        &self.out
    }

    /// Distances, field membership and repelling torques for one tick.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        &mut self,
        model: &RobotModel,
        kin: &Kinematics,
        q: &[f64],
        qdot: &[f64],
        inertia: &InertiaCache,
        dt: f64,
        cfg: &ApfConfig,
    ) -> &FieldOutput {
        for (w, s) in self.world.iter_mut().zip(&self.skeletons) {
            *w = kin.place(&s.shape, s.frame_id);
        }
        let qd = DVector::from_column_slice(qdot);
        let out = &mut self.out;
        out.tau_pairs.fill(0.0);
        out.min_d = f64::INFINITY;
        out.min_pair = None;
        out.n_active = 0;
        for (k, pair) in self.pairs.iter_mut().enumerate() {
            let dr = closest_unchecked(&self.world[pair.i], &self.world[pair.j]);
            pair.observe(dr, dt, cfg);
            let d = dr.surface_distance;
            if d < out.min_d {
                out.min_d = d;
                out.min_pair = Some(k);
            }
            let mut force = PairForce { d, active: pair.active, ..PairForce::default() };
            if pair.active {
                out.n_active += 1;
                pair_torques(
                    model,
                    kin,
                    &self.skeletons,
                    &self.world,
                    &self.scales,
                    pair,
                    &qd,
                    inertia,
                    cfg,
                    &mut self.jac,
                    &mut out.tau_pairs,
                    &mut force,
                );
            }
            out.forces[k] = force;
        }
        out.tau_joint_limits = joint_limit_torques(q, qdot, model, &inertia.m, cfg);
        out.tau_rep.copy_from(&out.tau_pairs);
        out.tau_rep += &out.tau_joint_limits;
        clamp_to_limits(model, &mut out.tau_rep);
        out
    }

    /// Sums the torques of the given active pairs from their last distance,
    /// adds joint-limit torques, and clamps to the torque limits.
    #[allow(clippy::too_many_arguments)]
    pub fn aggregate_torques(
        &mut self,
        active: &[PairState],
        model: &RobotModel,
        kin: &Kinematics,
        q: &[f64],
        qdot: &[f64],
        inertia: &InertiaCache,
        cfg: &ApfConfig,
    ) -> DVector<f64> {
        let qd = DVector::from_column_slice(qdot);
        let mut tau = DVector::zeros(model.n_joints());
        for pair in active.iter().filter(|p| p.active) {
            let mut f = PairForce::default();
            pair_torques(
                model,
                kin,
                &self.skeletons,
                &self.world,
                &self.scales,
                pair,
                &qd,
                inertia,
                cfg,
                &mut self.jac,
                &mut tau,
                &mut f,
            );
        }
        tau += joint_limit_torques(q, qdot, model, &inertia.m, cfg);
        clamp_to_limits(model, &mut tau);
        tau
    }
}

#[allow(clippy::too_many_arguments)]
fn pair_torques(
    model: &RobotModel,
    kin: &Kinematics,
    skeletons: &[PrimitiveSkeleton],
    world: &[Shape],
    scales: &[f64],
    pair: &PairState,
    qdot: &DVector<f64>,
    inertia: &InertiaCache,
    cfg: &ApfConfig,
    jac: &mut Matrix3xX<f64>,
    tau: &mut DVector<f64>,
    force: &mut PairForce,
) {
    let Some(dr) = pair.last else { return };
    let (si, sj) = (&skeletons[pair.i], &skeletons[pair.j]);
    let Ok(act) = acting_points(&dr, world[pair.i].radius, world[pair.j].radius) else {
        return;
    };
    let d = dr.surface_distance;
    let f = repelling_force(d, cfg.f_max, pair.d_th_eff);
    let k = stiffness(d, cfg.f_max, pair.d_th_eff);
    let n = dr.w / dr.center_distance;
    for (body, frame, u, dir, scale) in [
        (0, si.frame_id, act.u_i, n, scales[pair.i]),
        (1, sj.frame_id, act.u_j, -n, scales[pair.j]),
    ] {
        if frame < 0 {
            continue;
        }
        kin.point_jacobian_into(model, frame, &u, jac);
        let jd = jac.tr_mul(&dir);
        if jd.iter().all(|&x| x == 0.0) {
            continue;
        }
        let approach = jd.dot(qdot);
        let inv = jd.dot(&inertia.chol.solve(&jd));
        let damping = if inv > 0.0 { damping_coefficient(1.0 / inv, k, cfg.zeta) } else { 0.0 };
        let f_rep = f * scale;
        let f_damp = -damping * approach;
        tau.axpy(f_rep + f_damp, &jd, 1.0);
        if body == 0 {
            force.f_rep_i = f_rep;
            force.f_damp_i = f_damp;
            force.force_i = dir * f_rep;
        } else {
            force.f_rep_j = f_rep;
            force.f_damp_j = f_damp;
        }
    }
}
