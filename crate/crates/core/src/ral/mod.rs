//! Replica abstraction layer: fit four candidate primitives to each mesh,
//! keep the valid ones, pick the cheapest by cost-weighted excess volume and
//! decompose the winner into primitive skeletons.

mod fit;
pub mod fixtures;
mod io;

pub use fit::{fit_abox, fit_all, fit_capsule, fit_obox, fit_sphere, FIT_INFLATION};
pub use io::{load_mesh, load_mesh_dir, parse_obj, parse_stl_binary, write_obj, write_stl_binary};

use std::fmt;

use thiserror::Error;

use crate::envstore::{DesignValues, EnvironmentSnapshot};
use crate::geometry::{Mat3, Pose, PrimitiveSkeleton, Shape, Vec3};

/// Boxes thinner than this along any axis collapse to a single rounded plane.
pub const THIN_BOX_THRESHOLD: f64 = 0.05;
/// Vertices may lie this far outside the selected primitive before the
/// enclosure check complains.
pub const ENCLOSURE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RalError {
    #[error("mesh {mesh}: degenerate ({reason})")]
    DegenerateMesh { mesh: String, reason: String },
    #[error("mesh {0}: no valid candidate primitive")]
    NoValidCandidate(String),
    #[error("{path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("invalid costs: {0}")]
    InvalidCosts(String),
}

/// Triangle mesh posed in the world by `pose`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub name: String,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub pose: Pose,
}

impl TriangleMesh {
    pub fn new(name: impl Into<String>, vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, RalError> {
        let name = name.into();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= vertices.len())) {
            return Err(RalError::DegenerateMesh { mesh: name, reason: format!("triangle {t:?} indexes past the vertex list") });
        }
        if vertices.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(RalError::DegenerateMesh { mesh: name, reason: "non-finite vertex".into() });
        }
        Ok(Self { name, vertices, triangles, pose: Pose::identity() })
    }

    pub fn with_pose(mut self, pose: Pose) -> Self {
        self.pose = pose;
        self
    }

    pub fn world_vertices(&self) -> Vec<Vec3> {
        self.vertices.iter().map(|v| self.pose.transform_point(v)).collect()
    }

    /// World-frame axis-aligned bounds.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in self.world_vertices() {
            lo = lo.inf(&v);
            hi = hi.sup(&v);
        }
        (lo, hi)
    }

    /// Signed volume by the divergence theorem; positive for outward winding.
    pub fn signed_volume(&self) -> f64 {
        let w = self.world_vertices();
        self.triangles.iter().map(|t| w[t[0]].dot(&w[t[1]].cross(&w[t[2]]))).sum::<f64>() / 6.0
    }
}

/// Enclosed volume `|Σ det(v0, v1, v2)| / 6`.
pub fn mesh_volume(mesh: &TriangleMesh) -> Result<f64, RalError> {
    let v = mesh.signed_volume();
    if v < 0.0 {
        log::warn!("mesh {} has inward winding", mesh.name);
    }
    let v = v.abs();
    if !(v >= 1e-12) {
        return Err(RalError::DegenerateMesh { mesh: mesh.name.clone(), reason: format!("volume {v:e}") });
    }
    Ok(v)
}

/// Candidate kinds in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimitiveKind {
    Sphere,
    Capsule,
    ABox,
    OBox,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 4] = [PrimitiveKind::Sphere, PrimitiveKind::Capsule, PrimitiveKind::ABox, PrimitiveKind::OBox];

    pub fn as_str(self) -> &'static str {
        match self {
            PrimitiveKind::Sphere => "sph",
            PrimitiveKind::Capsule => "cap",
            PrimitiveKind::ABox => "abox",
            PrimitiveKind::OBox => "obox",
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitParams {
    Sphere { center: Vec3, radius: f64 },
    Capsule { a: Vec3, b: Vec3, radius: f64 },
    /// `axes` columns are the box axes; `half` the half extents along them.
    Box { center: Vec3, axes: Mat3, half: Vec3 },
}

/// A candidate primitive. `volume` is infinite when the fit is invalid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedPrimitive {
    pub kind: PrimitiveKind,
    pub params: Option<FitParams>,
    pub volume: f64,
}

impl FittedPrimitive {
    pub fn invalid(kind: PrimitiveKind) -> Self {
        Self { kind, params: None, volume: f64::INFINITY }
    }

    pub fn is_valid(&self) -> bool {
        self.params.is_some() && self.volume.is_finite()
    }

    /// Marks the fit invalid when it cannot hold the mesh volume.
    pub fn checked(self, mesh_volume: f64) -> Self {
        if self.volume.is_finite() && self.volume >= mesh_volume {
            self
        } else {
            Self { volume: f64::INFINITY, ..self }
        }
    }

    /// Largest distance by which a point lies outside the primitive.
    pub fn excess(&self, p: &Vec3) -> f64 {
        match self.params {
            None => f64::INFINITY,
            Some(FitParams::Sphere { center, radius }) => (p - center).norm() - radius,
            Some(FitParams::Capsule { a, b, radius }) => {
                let ab = b - a;
                let len2 = ab.norm_squared();
                let s = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
                (p - (a + ab * s)).norm() - radius
            }
            Some(FitParams::Box { center, axes, half }) => {
                let local = axes.transpose() * (p - center);
                (0..3).map(|k| local[k].abs() - half[k]).fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }
}

/// Per-kind selection weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveCosts {
    pub abox: f64,
    pub obox: f64,
    pub sphere: f64,
    pub capsule: f64,
}

impl Default for PrimitiveCosts {
    fn default() -> Self {
        Self { abox: 2.0, obox: 2.0, sphere: 0.9, capsule: 1.0 }
    }
}

impl PrimitiveCosts {
    pub fn of(&self, kind: PrimitiveKind) -> f64 {
        match kind {
            PrimitiveKind::ABox => self.abox,
            PrimitiveKind::OBox => self.obox,
            PrimitiveKind::Sphere => self.sphere,
            PrimitiveKind::Capsule => self.capsule,
        }
    }

    /// Parses `c_abox,c_obox,c_sph,c_cap`.
    pub fn parse(text: &str) -> Result<Self, RalError> {
        let vals: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| RalError::InvalidCosts(format!("{s:?}: {e}"))))
            .collect::<Result<_, _>>()?;
        let [abox, obox, sphere, capsule] = vals[..] else {
            return Err(RalError::InvalidCosts(format!("expected 4 values, got {}", vals.len())));
        };
        let c = Self { abox, obox, sphere, capsule };
        if [abox, obox, sphere, capsule].iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(RalError::InvalidCosts("costs must be positive and finite".into()));
        }
        Ok(c)
    }
}

/// `(V_p - V_mesh) · c(p)`, infinite for invalid candidates.
pub fn score(fit: &FittedPrimitive, mesh_volume: f64, costs: &PrimitiveCosts) -> f64 {
    if fit.is_valid() && fit.volume >= mesh_volume {
        (fit.volume - mesh_volume) * costs.of(fit.kind)
    } else {
        f64::INFINITY
    }
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-12)
}

/// Cost-weighted argmin over the valid candidates, ties going to the earlier
/// kind in [`PrimitiveKind::ALL`].
pub fn select_primitive(
    mesh_name: &str,
    mesh_volume: f64,
    fits: &[FittedPrimitive],
    costs: &PrimitiveCosts,
) -> Result<FittedPrimitive, RalError> {
    let mut ordered: Vec<&FittedPrimitive> = fits.iter().collect();
    ordered.sort_by_key(|f| f.kind);
    let mut best: Option<(&FittedPrimitive, f64)> = None;
    for f in ordered {
        let s = score(f, mesh_volume, costs);
        if !s.is_finite() {
            continue;
        }
        match best {
            Some((_, b)) if s >= b || ties(s, b) => {}
            _ => best = Some((f, s)),
        }
    }
    best.map(|(f, _)| *f).ok_or_else(|| RalError::NoValidCandidate(mesh_name.to_string()))
}

/// Skeletons for a selected primitive, named after `name`.
pub fn decompose_to_skeletons(name: &str, fit: &FittedPrimitive, thin_threshold: f64) -> Vec<PrimitiveSkeleton> {
    let Some(params) = fit.params else { return Vec::new() };
    let make = |n: String, shape: Shape| PrimitiveSkeleton::new(n, shape).ok();
    match params {
        FitParams::Sphere { center, radius } => make(name.to_string(), Shape::point(center, radius)).into_iter().collect(),
        FitParams::Capsule { a, b, radius } => {
            let shape = if (b - a).norm() > crate::geometry::MIN_DIRECTION_NORM {
                Shape::line(a, b - a, radius)
            } else {
                Shape::point(a, radius)
            };
            make(name.to_string(), shape).into_iter().collect()
        }
        FitParams::Box { center, axes, half } => {
            let mut order = [0usize, 1, 2];
            order.sort_by(|&i, &j| half[j].total_cmp(&half[i]).then(i.cmp(&j)));
            let axis = |k: usize| axes.column(k).into_owned();
            let [l, m, s] = order;
            if 2.0 * half[s] > thin_threshold {
                let mut out = Vec::with_capacity(6);
                for (k, &n) in order.iter().enumerate() {
                    let others: Vec<usize> = order.iter().copied().filter(|&o| o != n).collect();
                    let (a, b) = (others[0], others[1]);
                    for (side, sign) in [("p", 1.0), ("n", -1.0)] {
                        let o = center + axis(n) * (sign * half[n]) - axis(a) * half[a] - axis(b) * half[b];
                        let shape = Shape::plane(o, axis(a) * (2.0 * half[a]), axis(b) * (2.0 * half[b]), 0.0);
                        out.extend(make(format!("{name}_face{k}{side}"), shape));
                    }
                }
                out
            } else {
                let o = center - axis(l) * half[l] - axis(m) * half[m];
                let shape = Shape::plane(o, axis(l) * (2.0 * half[l]), axis(m) * (2.0 * half[m]), half[s]);
                make(name.to_string(), shape).into_iter().collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RalConfig {
    pub thin_threshold: f64,
    /// Reachable workspace sphere (center, radius); `None` keeps every mesh.
    pub workspace: Option<(Vec3, f64)>,
    /// Meshes whose name starts with this belong to the robot and are skipped.
    pub robot_prefix: String,
    pub check_enclosure: bool,
    pub version: u64,
    pub base_fixed: bool,
    pub design_values: DesignValues,
}

impl Default for RalConfig {
    fn default() -> Self {
        Self {
            thin_threshold: THIN_BOX_THRESHOLD,
            workspace: None,
            robot_prefix: "robot".into(),
            check_enclosure: true,
            version: 1,
            base_fixed: true,
            design_values: DesignValues::default(),
        }
    }
}

/// True when the mesh's world AABB touches the sphere.
pub fn within_workspace(mesh: &TriangleMesh, center: &Vec3, radius: f64) -> bool {
    let (lo, hi) = mesh.aabb();
    let nearest = center.sup(&lo).inf(&hi);
    (nearest - center).norm() <= radius
}

/// Outcome for one input mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshReport {
    pub mesh: String,
    pub volume: f64,
    /// Candidate scores in [`PrimitiveKind::ALL`] order.
    pub scores: [f64; 4],
    pub selected: Option<PrimitiveKind>,
    pub skeletons: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Abstraction {
    pub snapshot: EnvironmentSnapshot,
    pub reports: Vec<MeshReport>,
}

/// Runs the whole pipeline over `meshes` in order.
pub fn abstract_environment(
    meshes: &[TriangleMesh],
    reachable: &dyn Fn(&TriangleMesh) -> bool,
    costs: &PrimitiveCosts,
    cfg: &RalConfig,
) -> Abstraction {
    let mut skeletons = Vec::new();
    let mut reports = Vec::new();
    for mesh in meshes {
        let mut report = MeshReport {
            mesh: mesh.name.clone(),
            volume: 0.0,
            scores: [f64::INFINITY; 4],
            selected: None,
            skeletons: 0,
            note: None,
        };
        if !cfg.robot_prefix.is_empty() && mesh.name.starts_with(&cfg.robot_prefix) {
            report.note = Some("robot mesh excluded".into());
            reports.push(report);
            continue;
        }
        let in_reach = reachable(mesh) && cfg.workspace.is_none_or(|(c, r)| within_workspace(mesh, &c, r));
        if !in_reach {
            report.note = Some("outside workspace".into());
            reports.push(report);
            continue;
        }
        let volume = match mesh_volume(mesh) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("{e}");
                report.note = Some(e.to_string());
                reports.push(report);
                continue;
            }
        };
        report.volume = volume;
        let fits = fit_all(mesh, volume);
        for (k, kind) in PrimitiveKind::ALL.iter().enumerate() {
            if let Some(f) = fits.iter().find(|f| f.kind == *kind) {
                report.scores[k] = score(f, volume, costs);
            }
        }
        match select_primitive(&mesh.name, volume, &fits, costs) {
            Ok(best) => {
                if cfg.check_enclosure {
                    let worst = mesh.world_vertices().iter().map(|v| best.excess(v)).fold(f64::NEG_INFINITY, f64::max);
                    if worst > ENCLOSURE_TOL {
                        log::warn!("mesh {}: vertex {worst:.3e} m outside the selected {}", mesh.name, best.kind);
                        report.note = Some(format!("enclosure exceeded by {worst:.3e} m"));
                    }
                }
                let parts = decompose_to_skeletons(&mesh.name, &best, cfg.thin_threshold);
                report.selected = Some(best.kind);
                report.skeletons = parts.len();
                skeletons.extend(parts);
            }
            Err(e) => {
                log::warn!("{e}");
                report.note = Some(e.to_string());
            }
        }
        reports.push(report);
    }
    let snapshot = EnvironmentSnapshot::from_world_skeletons(cfg.version, cfg.base_fixed, cfg.design_values, &skeletons);
    Abstraction { snapshot, reports }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SkeletonKind;
    use approx::assert_relative_eq;

    fn box_fit(extents: [f64; 3]) -> FittedPrimitive {
        let half = Vec3::new(extents[0], extents[1], extents[2]) / 2.0;
        FittedPrimitive {
            kind: PrimitiveKind::ABox,
            params: Some(FitParams::Box { center: Vec3::zeros(), axes: Mat3::identity(), half }),
            volume: extents.iter().product(),
        }
    }

    #[test]
    fn large_box_becomes_six_planes() {
        let sk = decompose_to_skeletons("b", &box_fit([1.0, 0.8, 0.5]), THIN_BOX_THRESHOLD);
        assert_eq!(sk.len(), 6);
        assert!(sk.iter().all(|s| s.kind() == SkeletonKind::Plane && s.radius() == 0.0));
        let area: f64 = sk.iter().map(|s| s.shape.p.cross(&s.shape.q).norm()).sum();
        assert_relative_eq!(area, 2.0 * (0.8 + 0.5 + 0.4), max_relative = 1e-12);
    }

    #[test]
    fn thin_box_becomes_one_rounded_plane() {
        let sk = decompose_to_skeletons("b", &box_fit([1.0, 0.8, 0.04]), THIN_BOX_THRESHOLD);
        assert_eq!(sk.len(), 1);
        let s = &sk[0].shape;
        assert_relative_eq!(s.radius, 0.02, max_relative = 1e-12);
        assert_relative_eq!(s.p.norm(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(s.q.norm(), 0.8, max_relative = 1e-12);
        assert_relative_eq!(s.center().z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sphere_and_capsule_map_to_point_and_line() {
        let sph = FittedPrimitive {
            kind: PrimitiveKind::Sphere,
            params: Some(FitParams::Sphere { center: Vec3::new(1.0, 2.0, 3.0), radius: 0.1 }),
            volume: 1.0,
        };
        let sk = decompose_to_skeletons("s", &sph, THIN_BOX_THRESHOLD);
        assert_eq!(sk[0].kind(), SkeletonKind::Point);
        assert_eq!(sk[0].shape.origin, Vec3::new(1.0, 2.0, 3.0));
        let cap = FittedPrimitive {
            kind: PrimitiveKind::Capsule,
            params: Some(FitParams::Capsule { a: Vec3::zeros(), b: Vec3::x(), radius: 0.2 }),
            volume: 1.0,
        };
        assert_eq!(decompose_to_skeletons("c", &cap, THIN_BOX_THRESHOLD)[0].kind(), SkeletonKind::Line);
    }

    #[test]
    fn equal_scores_follow_kind_order() {
        let costs = PrimitiveCosts { abox: 1.0, obox: 1.0, sphere: 1.0, capsule: 1.0 };
        let mk = |kind| FittedPrimitive {
            kind,
            params: Some(FitParams::Sphere { center: Vec3::zeros(), radius: 1.0 }),
            volume: 2.0,
        };
        let fits = [mk(PrimitiveKind::OBox), mk(PrimitiveKind::ABox), mk(PrimitiveKind::Capsule), mk(PrimitiveKind::Sphere)];
        assert_eq!(select_primitive("m", 1.0, &fits, &costs).unwrap().kind, PrimitiveKind::Sphere);
        let none = [FittedPrimitive::invalid(PrimitiveKind::ABox)];
        assert!(select_primitive("m", 1.0, &none, &costs).is_err());
    }

    #[test]
    fn cost_parsing() {
        assert_eq!(PrimitiveCosts::parse("2,2,0.9,1").unwrap(), PrimitiveCosts::default());
        assert!(PrimitiveCosts::parse("2,2,0.9").is_err());
        assert!(PrimitiveCosts::parse("2,2,-1,1").is_err());
    }
}
