//! Serial-chain kinematics with classic (distal) DH parameters: forward
//! kinematics, world-frame skeleton updates, translational point Jacobians,
//! and a lumped-mass joint-space inertia matrix.

pub mod reference;

use nalgebra::{DMatrix, DVector, Matrix3xX, RowDVector};
use thiserror::Error;

use crate::geometry::{Mat3, Pose, PrimitiveSkeleton, Shape, Vec3, MIN_DIRECTION_NORM};

/// Floor added to the mass-matrix diagonal so it stays positive definite.
pub const MASS_DIAGONAL_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("unknown frame id {0}")]
    UnknownFrame(i32),
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("projection direction has zero length")]
    ZeroDirection,
    #[error("invalid robot model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Prismatic,
}

/// Classic DH parameters; the joint variable adds to `theta` (revolute) or
/// `d` (prismatic).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DhParams {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta: f64,
}

impl DhParams {
    pub fn new(a: f64, alpha: f64, d: f64, theta: f64) -> Self {
        Self { a, alpha, d, theta }
    }

    /// `Rz(theta) Tz(d) Tx(a) Rx(alpha)` for joint value `q`.
    pub fn transform(&self, kind: JointKind, q: f64) -> Pose {
        let (theta, d) = match kind {
            JointKind::Revolute => (self.theta + q, self.d),
            JointKind::Prismatic => (self.theta, self.d + q),
        };
        let (st, ct) = theta.sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        let rotation = Mat3::new(ct, -st * ca, st * sa, st, ct * ca, -ct * sa, 0.0, sa, ca);
        Pose::new(rotation, Vec3::new(self.a * ct, self.a * st, d))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub dh: DhParams,
    pub q_limit_low: f64,
    pub q_limit_up: f64,
    /// Point mass lumped at the origin of the joint's distal frame.
    pub lumped_mass: f64,
    /// Rotor inertia about the joint axis (revolute only).
    pub lumped_inertia: f64,
    pub torque_limit: f64,
    pub torque_rate_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    /// World pose of the chain base.
    pub base: Pose,
    pub joints: Vec<JointSpec>,
    /// Skeletons expressed in the distal frame of joint `frame_id`.
    pub link_skeletons: Vec<PrimitiveSkeleton>,
    /// Whether the leading `base_joints` joints may move.
    pub base_actuatable: bool,
    /// Number of leading joints forming the mobile base (gantry axes).
    pub base_joints: usize,
    /// Tool center point in the last frame.
    pub tcp: Vec3,
}

impl RobotModel {
    pub fn new(
        name: impl Into<String>,
        base: Pose,
        joints: Vec<JointSpec>,
        link_skeletons: Vec<PrimitiveSkeleton>,
    ) -> Result<Self, KinematicsError> {
        let model = Self {
            name: name.into(),
            base,
            joints,
            link_skeletons,
            base_actuatable: false,
            base_joints: 0,
            tcp: Vec3::zeros(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if self.joints.is_empty() {
            return Err(KinematicsError::InvalidModel("no joints".into()));
        }
        for j in &self.joints {
            if !(j.q_limit_low < j.q_limit_up) {
                return Err(KinematicsError::InvalidModel(format!("joint `{}` has low limit >= up limit", j.name)));
            }
            if j.lumped_mass < 0.0 || j.lumped_inertia < 0.0 {
                return Err(KinematicsError::InvalidModel(format!("joint `{}` has negative inertia", j.name)));
            }
        }
        if self.base_joints > self.joints.len() {
            return Err(KinematicsError::InvalidModel("more base joints than joints".into()));
        }
        for s in &self.link_skeletons {
            if s.frame_id < 0 || s.frame_id as usize >= self.joints.len() {
                return Err(KinematicsError::UnknownFrame(s.frame_id));
            }
        }
        Ok(())
    }

    pub fn check_q(&self, q: &[f64]) -> Result<(), KinematicsError> {
        if q.len() != self.joints.len() {
            return Err(KinematicsError::DimensionMismatch { expected: self.joints.len(), got: q.len() });
        }
        Ok(())
    }

    pub fn check_frame(&self, frame_id: i32) -> Result<(), KinematicsError> {
        if frame_id < -1 || frame_id >= self.joints.len() as i32 {
            return Err(KinematicsError::UnknownFrame(frame_id));
        }
        Ok(())
    }

    /// Whether joint `k` is currently allowed to move.
    pub fn joint_active(&self, k: usize) -> bool {
        k >= self.base_joints || self.base_actuatable
    }

    pub fn skeleton(&self, name: &str) -> Option<&PrimitiveSkeleton> {
        self.link_skeletons.iter().find(|s| s.name == name)
    }
}

/// World poses of every joint frame for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub base: Pose,
    /// `frames[k]` is the distal frame of joint `k`.
    pub frames: Vec<Pose>,
}

impl Kinematics {
    /// World pose of `frame_id`; identity for the world frame.
    pub fn frame(&self, frame_id: i32) -> Option<Pose> {
        if frame_id < 0 {
            Some(Pose::identity())
        } else {
            self.frames.get(frame_id as usize).copied()
        }
    }

    /// Axis direction and a point on the axis of joint `k`.
    pub fn joint_axis(&self, k: usize) -> (Vec3, Vec3) {
        let pose = if k == 0 { &self.base } else { &self.frames[k - 1] };
        (pose.rotation.column(2).into_owned(), pose.translation)
    }

    /// Shape attached to `frame_id`, expressed in the world.
    #[inline]
    pub fn place(&self, shape: &Shape, frame_id: i32) -> Shape {
        if frame_id < 0 {
            *shape
        } else {
            shape.transformed(&self.frames[frame_id as usize])
        }
    }

    /// Translational Jacobian of a world point rigidly attached to `frame_id`.
    pub fn point_jacobian(&self, model: &RobotModel, frame_id: i32, point: &Vec3) -> Matrix3xX<f64> {
        let n = model.n_joints();
        let mut jac = Matrix3xX::zeros(n);
        self.point_jacobian_into(model, frame_id, point, &mut jac);
        jac
    }

    /// Allocation-free variant of [`Kinematics::point_jacobian`].
    pub fn point_jacobian_into(&self, model: &RobotModel, frame_id: i32, point: &Vec3, jac: &mut Matrix3xX<f64>) {
        jac.fill(0.0);
        if frame_id < 0 {
            return;
        }
        let last = (frame_id as usize).min(model.n_joints() - 1);
        for k in 0..=last {
            if !model.joint_active(k) {
                continue;
            }
            let (z, o) = self.joint_axis(k);
            let col = match model.joints[k].kind {
                JointKind::Revolute => z.cross(&(point - o)),
                JointKind::Prismatic => z,
            };
            jac.set_column(k, &col);
        }
    }

    pub fn tcp(&self, model: &RobotModel) -> Vec3 {
        self.frames[model.n_joints() - 1].transform_point(&model.tcp)
    }
}

pub fn forward_kinematics(model: &RobotModel, q: &[f64]) -> Result<Kinematics, KinematicsError> {
    model.check_q(q)?;
    let mut frames = Vec::with_capacity(q.len());
    let mut pose = model.base;
    for (joint, &qk) in model.joints.iter().zip(q) {
        pose = pose.compose(&joint.dh.transform(joint.kind, qk));
        frames.push(pose);
    }
    Ok(Kinematics { base: model.base, frames })
}

/// World-frame copies of `attached`; world-fixed skeletons pass through.
pub fn update_skeleton_states(
    model: &RobotModel,
    q: &[f64],
    attached: &[PrimitiveSkeleton],
) -> Result<Vec<PrimitiveSkeleton>, KinematicsError> {
    let kin = forward_kinematics(model, q)?;
    attached
        .iter()
        .map(|s| {
            model.check_frame(s.frame_id)?;
            Ok(PrimitiveSkeleton { shape: kin.place(&s.shape, s.frame_id), ..s.clone() })
        })
        .collect()
}

pub fn point_jacobian(
    model: &RobotModel,
    q: &[f64],
    frame_id: i32,
    point_world: &Vec3,
) -> Result<Matrix3xX<f64>, KinematicsError> {
    model.check_frame(frame_id)?;
    let kin = forward_kinematics(model, q)?;
    Ok(kin.point_jacobian(model, frame_id, point_world))
}

/// `J_d = (ŵᵀ) J_x`: the Jacobian row of the motion along `w_act`.
pub fn projected_jacobian(jx: &Matrix3xX<f64>, w_act: &Vec3) -> Result<RowDVector<f64>, KinematicsError> {
    let n = w_act.norm();
    if !(n > MIN_DIRECTION_NORM) {
        return Err(KinematicsError::ZeroDirection);
    }
    Ok((w_act / n).transpose() * jx)
}

/// Joint-space inertia of lumped point masses at the frame origins plus rotor
/// inertia on revolute diagonals: `M = Σ_b m_b J_bᵀ J_b + diag(I_rotor)`.
///
/// The point-mass sum is the composite-rigid-body result for bodies without
/// rotational inertia. Locked base joints keep their own diagonal entries so
/// the matrix stays invertible.
pub fn mass_matrix(model: &RobotModel, q: &[f64]) -> Result<DMatrix<f64>, KinematicsError> {
    let kin = forward_kinematics(model, q)?;
    Ok(mass_matrix_from(model, &kin))
}

pub fn mass_matrix_from(model: &RobotModel, kin: &Kinematics) -> DMatrix<f64> {
    let n = model.n_joints();
    let mut m = DMatrix::zeros(n, n);
    let mut jac = Matrix3xX::zeros(n);
    for (b, joint) in model.joints.iter().enumerate() {
        if joint.lumped_mass == 0.0 {
            continue;
        }
        let p = kin.frames[b].translation;
        body_jacobian_all(model, kin, b, &p, &mut jac);
        m += (jac.transpose() * &jac) * joint.lumped_mass;
    }
    for (k, joint) in model.joints.iter().enumerate() {
        if joint.kind == JointKind::Revolute {
            m[(k, k)] += joint.lumped_inertia;
        }
        m[(k, k)] += MASS_DIAGONAL_FLOOR;
    }
    m
}

/// Gravity torques `g(q) = -Σ_b m_b J_bᵀ gravity`, i.e. the torques needed to
/// hold the configuration.
pub fn gravity_torques(model: &RobotModel, kin: &Kinematics, gravity: &Vec3) -> DVector<f64> {
    let n = model.n_joints();
    let mut g = DVector::zeros(n);
    let mut jac = Matrix3xX::zeros(n);
    for (b, joint) in model.joints.iter().enumerate() {
        if joint.lumped_mass == 0.0 {
            continue;
        }
        let p = kin.frames[b].translation;
        body_jacobian_all(model, kin, b, &p, &mut jac);
        g -= jac.transpose() * (gravity * joint.lumped_mass);
    }
    g
}

/// Point Jacobian over all joints, ignoring the base lock.
fn body_jacobian_all(model: &RobotModel, kin: &Kinematics, frame: usize, p: &Vec3, jac: &mut Matrix3xX<f64>) {
    jac.fill(0.0);
    for k in 0..=frame {
        let (z, o) = kin.joint_axis(k);
        let col = match model.joints[k].kind {
            JointKind::Revolute => z.cross(&(p - o)),
            JointKind::Prismatic => z,
        };
        jac.set_column(k, &col);
    }
}

/// Decouples locked base joints from the rest of the chain so that `M⁻¹`
/// describes the motion of the joints that can actually move.
pub fn lock_inactive_joints(model: &RobotModel, m: &mut DMatrix<f64>) {
    let n = model.n_joints();
    for k in (0..n).filter(|&k| !model.joint_active(k)) {
        for l in 0..n {
            if l != k {
                m[(k, l)] = 0.0;
                m[(l, k)] = 0.0;
            }
        }
    }
}

/// Frame id for a frame name: `world`, `joint_<k>` or `ee` (the last joint).
pub fn frame_id_from_name(model: &RobotModel, name: &str) -> Option<i32> {
    let n = model.n_joints() as i32;
    match name {
        "world" => Some(-1),
        "ee" => Some(n - 1),
        _ => {
            let k: i32 = name.strip_prefix("joint_")?.parse().ok()?;
            (0..n).contains(&k).then_some(k)
        }
    }
}

pub fn frame_name(model: &RobotModel, frame_id: i32) -> String {
    if frame_id < 0 {
        "world".to_string()
    } else if frame_id as usize == model.n_joints() - 1 {
        "ee".to_string()
    } else {
        format!("joint_{frame_id}")
    }
}
