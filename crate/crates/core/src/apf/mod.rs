//! Artificial potential field: repelling force, stiffness and damping per
//! distance pair, joint-limit avoidance, and torque limiting.

mod field;

pub use field::{count_pairs, enumerate_pairs, AvoidanceField, FieldOutput, PairForce, PairState, EXIT_HYSTERESIS};

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, RowDVector};
use thiserror::Error;

use crate::geometry::{DistanceResult, GeometryError, Vec3, MIN_DIRECTION_NORM};
use crate::kinematics::{lock_inactive_joints, mass_matrix_from, JointKind, Kinematics, KinematicsError, RobotModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApfError {
    #[error("invalid field configuration: {0}")]
    InvalidConfig(String),
    #[error("coincident skeleton centers, no acting direction")]
    DegenerateDirection,
    #[error("projected Jacobian is zero")]
    ZeroJacobian,
    #[error("mass matrix is not positive definite")]
    NotPositiveDefinite,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Force amplitude and activation distance of one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldParams {
    pub f_max: f64,
    pub d_th: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApfConfig {
    pub f_max: f64,
    pub d_th: f64,
    pub zeta: f64,
    /// Threshold growth per unit approach speed at field entry, s/m.
    pub velocity_gain: f64,
    pub d_th_bounds: (f64, f64),
    /// Repelling-force multiplier by skeleton name, 1 when absent.
    pub body_force_scale: BTreeMap<String, f64>,
    pub joint_limits_enabled: bool,
    pub joint_limit_revolute: FieldParams,
    pub joint_limit_prismatic: FieldParams,
}

impl Default for ApfConfig {
    fn default() -> Self {
        Self {
            f_max: 30.0,
            d_th: 0.06,
            zeta: 0.2,
            velocity_gain: 0.0,
            d_th_bounds: (0.02, 0.2),
            body_force_scale: BTreeMap::new(),
            joint_limits_enabled: true,
            joint_limit_revolute: FieldParams { f_max: 30.0, d_th: 0.1 },
            joint_limit_prismatic: FieldParams { f_max: 300.0, d_th: 0.02 },
        }
    }
}

impl ApfConfig {
    pub fn validate(&self) -> Result<(), ApfError> {
        let bad = |m: &str| Err(ApfError::InvalidConfig(m.to_string()));
        if !(self.f_max > 0.0) {
            return bad("f_max must be positive");
        }
        if !(self.d_th > 0.0) {
            return bad("d_th must be positive");
        }
        if !(0.0..=1.0).contains(&self.zeta) {
            return bad("zeta must lie in [0, 1]");
        }
        if !(self.velocity_gain >= 0.0) {
            return bad("velocity_gain must be non-negative");
        }
        let (lo, hi) = self.d_th_bounds;
        if !(lo > 0.0 && lo <= self.d_th && self.d_th <= hi) {
            return bad("d_th_bounds must be positive and contain d_th");
        }
        if self.body_force_scale.values().any(|&s| !(s > 0.0)) {
            return bad("body force scales must be positive");
        }
        for p in [self.joint_limit_revolute, self.joint_limit_prismatic] {
            if !(p.f_max > 0.0 && p.d_th > 0.0) {
                return bad("joint-limit field parameters must be positive");
            }
        }
        Ok(())
    }

    pub fn scale_of(&self, name: &str) -> f64 {
        self.body_force_scale.get(name).copied().unwrap_or(1.0)
    }

    /// Threshold for a pair entering the field at rate `d_dot`.
    pub fn entry_threshold(&self, d_dot: f64) -> f64 {
        let (lo, hi) = self.d_th_bounds;
        (self.d_th * (1.0 + self.velocity_gain * (-d_dot).max(0.0))).clamp(lo, hi)
    }
}

/// Field energy. Below zero distance it continues linearly with slope `-f_max`.
pub fn potential(d: f64, f_max: f64, d_th: f64) -> f64 {
    if d >= d_th {
        0.0
    } else if d >= 0.0 {
        -(f_max / (3.0 * d_th * d_th)) * (d - d_th).powi(3)
    } else {
        f_max * d_th / 3.0 - f_max * d
    }
}

/// `dE/dd`; negative inside the field and saturated at `-f_max` on penetration.
pub fn repelling_force(d: f64, f_max: f64, d_th: f64) -> f64 {
    if d >= d_th {
        0.0
    } else if d >= 0.0 {
        -(f_max / (d_th * d_th)) * (d - d_th).powi(2)
    } else {
        -f_max
    }
}

/// `dF/dd`; held at its contact value on penetration.
pub fn stiffness(d: f64, f_max: f64, d_th: f64) -> f64 {
    if d >= d_th {
        0.0
    } else {
        -(2.0 * f_max / (d_th * d_th)) * (d.max(0.0) - d_th)
    }
}

/// Surface points and directions where the pair's forces act.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActingPoints {
    pub u_i: Vec3,
    pub w_i: Vec3,
    pub u_j: Vec3,
    pub w_j: Vec3,
}

/// The radius of `j` is implied by `d` and kept for symmetry of the call.
pub fn acting_points(dr: &DistanceResult, r_i: f64, _r_j: f64) -> Result<ActingPoints, ApfError> {
    if !(dr.center_distance > MIN_DIRECTION_NORM) {
        return Err(ApfError::DegenerateDirection);
    }
    let n = dr.w / dr.center_distance;
    Ok(ActingPoints {
        u_i: dr.u + n * r_i,
        w_i: dr.w,
        u_j: dr.u + n * (r_i + dr.surface_distance),
        w_j: -dr.w,
    })
}

/// Joint-space inertia prepared for the field: locked joints decoupled and
/// factorized once per tick.
#[derive(Debug, Clone)]
pub struct InertiaCache {
    pub m: DMatrix<f64>,
    pub chol: Cholesky<f64, Dyn>,
}

impl InertiaCache {
    pub fn new(model: &RobotModel, kin: &Kinematics) -> Result<Self, ApfError> {
        let mut m = mass_matrix_from(model, kin);
        lock_inactive_joints(model, &mut m);
        Self::from_matrix(m)
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self, ApfError> {
        let chol = Cholesky::new(m.clone()).ok_or(ApfError::NotPositiveDefinite)?;
        Ok(Self { m, chol })
    }
}

/// `m_d = (J_d M⁻¹ J_dᵀ)⁻¹`.
pub fn damping_mass(jd: &RowDVector<f64>, m: &DMatrix<f64>) -> Result<f64, ApfError> {
    let chol = Cholesky::new(m.clone()).ok_or(ApfError::NotPositiveDefinite)?;
    damping_mass_with(jd, &chol)
}

pub fn damping_mass_with(jd: &RowDVector<f64>, chol: &Cholesky<f64, Dyn>) -> Result<f64, ApfError> {
    if jd.iter().all(|&x| x == 0.0) {
        return Err(ApfError::ZeroJacobian);
    }
    let x = chol.solve(&jd.transpose());
    let inv = jd.dot(&x.transpose());
    if !(inv > 0.0) {
        return Err(ApfError::ZeroJacobian);
    }
    Ok(1.0 / inv)
}

pub fn damping_coefficient(m_d: f64, k: f64, zeta: f64) -> f64 {
    2.0 * m_d * k.max(0.0).sqrt() * zeta
}

/// Repelling torques keeping each active joint away from its limits, with
/// damping from the joint's own diagonal inertia.
pub fn joint_limit_torques(q: &[f64], qdot: &[f64], model: &RobotModel, m: &DMatrix<f64>, cfg: &ApfConfig) -> DVector<f64> {
    let n = model.n_joints();
    let mut tau = DVector::zeros(n);
    if !cfg.joint_limits_enabled {
        return tau;
    }
    for (k, joint) in model.joints.iter().enumerate() {
        if !model.joint_active(k) {
            continue;
        }
        let p = match joint.kind {
            JointKind::Revolute => cfg.joint_limit_revolute,
            JointKind::Prismatic => cfg.joint_limit_prismatic,
        };
        let d_low = q[k] - joint.q_limit_low;
        let d_up = joint.q_limit_up - q[k];
        let mut t = 0.0;
        let mut kk = 0.0;
        if d_low < p.d_th {
            t -= repelling_force(d_low, p.f_max, p.d_th);
            kk += stiffness(d_low, p.f_max, p.d_th);
        }
        if d_up < p.d_th {
            t += repelling_force(d_up, p.f_max, p.d_th);
            kk += stiffness(d_up, p.f_max, p.d_th);
        }
        if kk > 0.0 {
            t -= damping_coefficient(m[(k, k)], kk, cfg.zeta) * qdot[k];
        }
        tau[k] = t;
    }
    tau
}

/// Per-joint magnitude clamp plus a symmetric clamp on the change per tick.
#[derive(Debug, Clone)]
pub struct TorqueLimiter {
    pub limits: Vec<f64>,
    pub rate_limits: Vec<f64>,
    prev: Option<DVector<f64>>,
}

impl TorqueLimiter {
    pub fn new(model: &RobotModel) -> Self {
        Self {
            limits: model.joints.iter().map(|j| j.torque_limit).collect(),
            rate_limits: model.joints.iter().map(|j| j.torque_rate_limit).collect(),
            prev: None,
        }
    }

    pub fn reset(&mut self) {
        self.prev = None;
    }

    /// Limited torque; the first call only applies the magnitude clamp.
    pub fn apply(&mut self, tau: &DVector<f64>, dt: f64) -> DVector<f64> {
        let mut out = tau.clone();
        for k in 0..out.len() {
            let mut t = out[k].clamp(-self.limits[k], self.limits[k]);
            if let Some(prev) = &self.prev {
                let step = self.rate_limits[k] * dt;
                t = t.clamp(prev[k] - step, prev[k] + step);
            }
            out[k] = t;
        }
        self.prev = Some(out.clone());
        out
    }
}

/// Clamps each component to the joint's torque limit.
pub fn clamp_to_limits(model: &RobotModel, tau: &mut DVector<f64>) {
    for (t, j) in tau.iter_mut().zip(&model.joints) {
        *t = t.clamp(-j.torque_limit, j.torque_limit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn field_values_at_table_design_point() {
        assert_relative_eq!(potential(0.0, 30.0, 0.06), 0.6, max_relative = 1e-12);
        assert_relative_eq!(repelling_force(0.0, 30.0, 0.06), -30.0, max_relative = 1e-12);
        assert_relative_eq!(repelling_force(0.03, 30.0, 0.06), -7.5, max_relative = 1e-12);
        assert_relative_eq!(stiffness(0.03, 30.0, 0.06), 500.0, max_relative = 1e-12);
        assert_eq!(potential(0.06, 30.0, 0.06), 0.0);
        assert_eq!(repelling_force(1.06, 30.0, 0.06), 0.0);
        assert_eq!(stiffness(0.06, 30.0, 0.06), 0.0);
    }

    #[test]
    fn penetration_saturates() {
        assert_eq!(repelling_force(-0.01, 30.0, 0.06), -30.0);
        assert_eq!(stiffness(-0.01, 30.0, 0.06), stiffness(0.0, 30.0, 0.06));
        assert_relative_eq!(potential(-0.01, 30.0, 0.06), 0.6 + 0.3, max_relative = 1e-12);
    }

    #[test]
    fn acting_points_for_sphere_pair() {
        let dr = DistanceResult {
            u: Vec3::zeros(),
            w: Vec3::new(1.0, 0.0, 0.0),
            s_i: 0.0,
            t_i: 0.0,
            s_j: 0.0,
            t_j: 0.0,
            center_distance: 1.0,
            surface_distance: 0.7,
        };
        let a = acting_points(&dr, 0.1, 0.2).unwrap();
        assert_relative_eq!(a.u_i, Vec3::new(0.1, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(a.u_j, Vec3::new(0.8, 0.0, 0.0), epsilon = 1e-15);
        assert_eq!(a.w_i, -a.w_j);
        let zero = DistanceResult { w: Vec3::zeros(), center_distance: 0.0, ..dr };
        assert_eq!(acting_points(&zero, 0.1, 0.2), Err(ApfError::DegenerateDirection));
    }

    #[test]
    fn damping_mass_scalar_and_scaling() {
        let m = DMatrix::from_element(1, 1, 3.0);
        let jd = RowDVector::from_element(1, 1.0);
        assert_relative_eq!(damping_mass(&jd, &m).unwrap(), 3.0, max_relative = 1e-14);
        assert_relative_eq!(damping_mass(&(jd * 2.0), &m).unwrap(), 0.75, max_relative = 1e-14);
        assert_eq!(damping_mass(&RowDVector::zeros(1), &m), Err(ApfError::ZeroJacobian));
    }

    #[test]
    fn damping_coefficient_values() {
        assert_relative_eq!(damping_coefficient(1.0, 500.0, 0.2), 0.4 * 500f64.sqrt(), max_relative = 1e-14);
        assert!((damping_coefficient(1.0, 500.0, 0.2) - 8.944).abs() < 1e-3);
        assert_eq!(damping_coefficient(2.0, 0.0, 0.2), 0.0);
        assert_eq!(damping_coefficient(2.0, 800.0, 0.0), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(ApfConfig::default().validate().is_ok());
        let bad = ApfConfig { zeta: 1.5, ..ApfConfig::default() };
        assert!(bad.validate().is_err());
        let mut scaled = ApfConfig::default();
        scaled.body_force_scale.insert("gantry_z".into(), 0.0);
        assert!(scaled.validate().is_err());
    }

    #[test]
    fn entry_threshold_grows_with_approach_speed() {
        let cfg = ApfConfig { velocity_gain: 1.0, ..ApfConfig::default() };
        assert_eq!(cfg.entry_threshold(0.3), 0.06);
        assert_relative_eq!(cfg.entry_threshold(-0.5), 0.09, max_relative = 1e-12);
        assert_eq!(cfg.entry_threshold(-100.0), 0.2);
    }

    #[test]
    fn limiter_clamps_magnitude_then_rate() {
        let mut lim = TorqueLimiter { limits: vec![10.0], rate_limits: vec![1000.0], prev: None };
        let a = lim.apply(&DVector::from_element(1, 50.0), 1e-3);
        assert_eq!(a[0], 10.0);
        let b = lim.apply(&DVector::from_element(1, -10.0), 1e-3);
        assert_eq!(b[0], 9.0);
    }
}
