//! Primitive skeletons (points, bounded segments, bounded rectangles with a
//! radius) and analytical minimum-distance queries between them.
//!
//! A skeleton inflated by its radius describes a sphere, a capsule or a
//! rounded cuboid. All distance routines work on the center geometry and
//! subtract the radii at the end.

mod distance;
mod oracle;

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub use distance::{closest_points, DistanceResult};
pub(crate) use distance::closest_unchecked;
pub use oracle::brute_force_distance;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Direction vectors shorter than this are treated as degenerate.
pub const MIN_DIRECTION_NORM: f64 = 1e-12;
/// Relative tolerance on `P·Q` for plane skeletons.
pub const PLANE_ORTHOGONALITY_TOL: f64 = 1e-9;
/// `|sin(angle)|` below this classifies two directions as parallel.
pub const PARALLEL_SIN_TOL: f64 = 1e-8;
/// Frame id of skeletons fixed in the world.
pub const WORLD_FRAME: i32 = -1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("skeleton `{name}` is degenerate: {reason}")]
    DegenerateSkeleton { name: String, reason: String },
    #[error("rotation is not orthonormal (|R Rt - I| = {0:e})")]
    NonOrthonormalRotation(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SkeletonKind {
    Point,
    Line,
    Plane,
}

impl SkeletonKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SkeletonKind::Point => "point",
            SkeletonKind::Line => "line",
            SkeletonKind::Plane => "plane",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "point" => Some(SkeletonKind::Point),
            "line" => Some(SkeletonKind::Line),
            "plane" => Some(SkeletonKind::Plane),
            _ => None,
        }
    }
}

impl fmt::Display for SkeletonKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rigid transform `x_world = translation + rotation * x_local`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self { rotation: Mat3::identity(), translation }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.translation + self.rotation * p
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self * other`, i.e. `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose { rotation: rt, translation: -(rt * self.translation) }
    }

    /// Frobenius norm of `R Rᵀ − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation * self.rotation.transpose() - Mat3::identity()).norm()
    }
}

/// Pure geometry of a skeleton: `x = O + s P + t Q` with `s, t ∈ [0, 1]`
/// (unused direction vectors are zero), inflated by `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub kind: SkeletonKind,
    pub origin: Vec3,
    pub p: Vec3,
    pub q: Vec3,
    pub radius: f64,
}

impl Shape {
    pub fn point(origin: Vec3, radius: f64) -> Self {
        Self { kind: SkeletonKind::Point, origin, p: Vec3::zeros(), q: Vec3::zeros(), radius }
    }

    pub fn line(origin: Vec3, p: Vec3, radius: f64) -> Self {
        Self { kind: SkeletonKind::Line, origin, p, q: Vec3::zeros(), radius }
    }

    pub fn plane(origin: Vec3, p: Vec3, q: Vec3, radius: f64) -> Self {
        Self { kind: SkeletonKind::Plane, origin, p, q, radius }
    }

    /// Point on the center geometry at scaling factors `(s, t)`.
    #[inline]
    pub fn at(&self, s: f64, t: f64) -> Vec3 {
        match self.kind {
            SkeletonKind::Point => self.origin,
            SkeletonKind::Line => self.origin + self.p * s,
            SkeletonKind::Plane => self.origin + self.p * s + self.q * t,
        }
    }

    /// Geometric center of the bounded domain.
    pub fn center(&self) -> Vec3 {
        self.at(0.5, 0.5)
    }

    /// Largest direction-vector length (zero for points).
    pub fn extent(&self) -> f64 {
        match self.kind {
            SkeletonKind::Point => 0.0,
            SkeletonKind::Line => self.p.norm(),
            SkeletonKind::Plane => self.p.norm().max(self.q.norm()),
        }
    }

    /// Checks the per-kind invariants; `name` is only used for error messages.
    pub fn validate(&self, name: &str) -> Result<(), GeometryError> {
        let degenerate = |reason: String| GeometryError::DegenerateSkeleton { name: name.to_string(), reason };
        let finite = self.origin.iter().chain(self.p.iter()).chain(self.q.iter()).all(|v| v.is_finite());
        if !finite || !self.radius.is_finite() {
            return Err(degenerate("non-finite component".into()));
        }
        if self.radius < 0.0 {
            return Err(degenerate(format!("negative radius {}", self.radius)));
        }
        match self.kind {
            SkeletonKind::Point => Ok(()),
            SkeletonKind::Line => {
                if self.p.norm() < MIN_DIRECTION_NORM {
                    return Err(degenerate("|P| below 1e-12".into()));
                }
                Ok(())
            }
            SkeletonKind::Plane => {
                let (np, nq) = (self.p.norm(), self.q.norm());
                if np < MIN_DIRECTION_NORM {
                    return Err(degenerate("|P| below 1e-12".into()));
                }
                if nq < MIN_DIRECTION_NORM {
                    return Err(degenerate("|Q| below 1e-12".into()));
                }
                let cos = self.p.dot(&self.q) / (np * nq);
                if cos.abs() > PLANE_ORTHOGONALITY_TOL {
                    return Err(degenerate(format!("P and Q not perpendicular (cos = {cos:e})")));
                }
                Ok(())
            }
        }
    }

    /// Applies a rigid transform without checking the rotation.
    #[inline]
    pub fn transformed(&self, pose: &Pose) -> Shape {
        Shape {
            kind: self.kind,
            origin: pose.transform_point(&self.origin),
            p: pose.rotation * self.p,
            q: pose.rotation * self.q,
            radius: self.radius,
        }
    }
}

/// A named skeleton linked to a kinematic frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveSkeleton {
    pub name: String,
    pub shape: Shape,
    /// Index into the kinematic chain, [`WORLD_FRAME`] for world-fixed.
    pub frame_id: i32,
    /// Names of skeletons this one is never paired with.
    pub ignore: BTreeSet<String>,
}

impl PrimitiveSkeleton {
    pub fn new(name: impl Into<String>, shape: Shape) -> Result<Self, GeometryError> {
        let name = name.into();
        shape.validate(&name)?;
        Ok(Self { name, shape, frame_id: WORLD_FRAME, ignore: BTreeSet::new() })
    }

    pub fn point(name: impl Into<String>, origin: Vec3, radius: f64) -> Result<Self, GeometryError> {
        Self::new(name, Shape::point(origin, radius))
    }

    pub fn line(name: impl Into<String>, origin: Vec3, p: Vec3, radius: f64) -> Result<Self, GeometryError> {
        Self::new(name, Shape::line(origin, p, radius))
    }

    pub fn plane(
        name: impl Into<String>,
        origin: Vec3,
        p: Vec3,
        q: Vec3,
        radius: f64,
    ) -> Result<Self, GeometryError> {
        Self::new(name, Shape::plane(origin, p, q, radius))
    }

    pub fn with_frame(mut self, frame_id: i32) -> Self {
        self.frame_id = frame_id;
        self
    }

    pub fn with_ignores<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.ignore.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn kind(&self) -> SkeletonKind {
        self.shape.kind
    }

    pub fn radius(&self) -> f64 {
        self.shape.radius
    }

    pub fn is_world_fixed(&self) -> bool {
        self.frame_id < 0
    }

    pub fn ignores(&self, other: &str) -> bool {
        self.ignore.contains(other)
    }
}

/// Maps a skeleton into the world frame: `O' = t + R O`, `P' = R P`, `Q' = R Q`.
pub fn transform_to_world(
    ps: &PrimitiveSkeleton,
    rotation: &Mat3,
    translation: &Vec3,
) -> Result<PrimitiveSkeleton, GeometryError> {
    let pose = Pose::new(*rotation, *translation);
    let err = pose.orthonormality_error();
    if !(err < 1e-9) {
        return Err(GeometryError::NonOrthonormalRotation(err));
    }
    Ok(PrimitiveSkeleton { shape: ps.shape.transformed(&pose), ..ps.clone() })
}

/// Rotation about the z axis.
pub fn rot_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation about the x axis.
pub fn rot_x(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Rotation about the y axis.
pub fn rot_y(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}
