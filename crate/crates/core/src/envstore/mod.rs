//! Versioned environment documents: the JSON schema shared by the
//! abstraction side and the control loop, and a directory-backed store with
//! atomic publish.

mod store;

pub use store::{EnvStore, ENV_DIR_VAR};

use std::collections::BTreeSet;
use std::io;

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::geometry::{GeometryError, PrimitiveSkeleton, Shape, SkeletonKind, Vec3, WORLD_FRAME};
use crate::kinematics::{frame_id_from_name, frame_name, RobotModel};

/// Plane records with a larger relative `P·Q` are re-orthogonalized on load.
pub const PLANE_REPAIR_TOL: f64 = 1e-9;
/// Repairs above this relative `P·Q` are logged as warnings.
pub const PLANE_WARN_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("version {got} does not advance past {current}")]
    VersionRegression { current: u64, got: u64 },
    #[error("skeleton {skeleton} ignores unknown skeleton {name}")]
    UnknownIgnore { skeleton: String, name: String },
    #[error("skeleton {skeleton} references unknown frame {frame}")]
    UnknownFrame { skeleton: String, frame: String },
    #[error("duplicate skeleton name {0}")]
    DuplicateName(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl EnvError {
    fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        EnvError::SchemaViolation { path: path.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignValues {
    pub f_max: f64,
    pub d_th: f64,
    pub zeta: f64,
}

impl Default for DesignValues {
    fn default() -> Self {
        Self { f_max: 30.0, d_th: 0.06, zeta: 0.2 }
    }
}

/// One skeleton as stored in the document. Vectors are in the linked frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonRecord {
    pub name: String,
    pub kind: SkeletonKind,
    pub radius: f64,
    pub frame: String,
    pub ignores: Vec<String>,
    pub o: [f64; 3],
    pub p: [f64; 3],
    pub q: [f64; 3],
}

impl SkeletonRecord {
    pub fn from_skeleton(ps: &PrimitiveSkeleton, frame: &str) -> Self {
        let arr = |v: &Vec3| [v.x, v.y, v.z];
        Self {
            name: ps.name.clone(),
            kind: ps.kind(),
            radius: ps.shape.radius,
            frame: frame.to_string(),
            ignores: ps.ignore.iter().cloned().collect(),
            o: arr(&ps.shape.origin),
            p: arr(&ps.shape.p),
            q: arr(&ps.shape.q),
        }
    }

    pub fn shape(&self) -> Shape {
        let v = |a: &[f64; 3]| Vec3::new(a[0], a[1], a[2]);
        let (p, q) = match self.kind {
            SkeletonKind::Point => (Vec3::zeros(), Vec3::zeros()),
            SkeletonKind::Line => (v(&self.p), Vec3::zeros()),
            SkeletonKind::Plane => (v(&self.p), v(&self.q)),
        };
        Shape { kind: self.kind, origin: v(&self.o), p, q, radius: self.radius }
    }
}

/// Immutable, versioned set of environment skeletons plus header flags.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSnapshot {
    pub version: u64,
    pub base_fixed: bool,
    pub count: usize,
    pub design_values: DesignValues,
    pub skeletons: Vec<SkeletonRecord>,
}

impl EnvironmentSnapshot {
    pub fn new(version: u64, base_fixed: bool, design_values: DesignValues, skeletons: Vec<SkeletonRecord>) -> Self {
        Self { version, base_fixed, count: skeletons.len(), design_values, skeletons }
    }

    /// World-fixed skeletons as records.
    pub fn from_world_skeletons(
        version: u64,
        base_fixed: bool,
        design_values: DesignValues,
        skeletons: &[PrimitiveSkeleton],
    ) -> Self {
        let records = skeletons.iter().map(|s| SkeletonRecord::from_skeleton(s, "world")).collect();
        Self::new(version, base_fixed, design_values, records)
    }

    /// Like [`Self::from_world_skeletons`] but keeps each skeleton's frame link.
    pub fn from_skeletons(
        version: u64,
        base_fixed: bool,
        design_values: DesignValues,
        skeletons: &[PrimitiveSkeleton],
        model: &RobotModel,
    ) -> Self {
        let records = skeletons
            .iter()
            .map(|s| SkeletonRecord::from_skeleton(s, &frame_name(model, s.frame_id)))
            .collect();
        Self::new(version, base_fixed, design_values, records)
    }

    /// Checks frame names and ignore targets against `model` and builds the
    /// skeletons in their linked frames.
    pub fn to_skeletons(&self, model: &RobotModel) -> Result<Vec<PrimitiveSkeleton>, EnvError> {
        let mut known: BTreeSet<&str> = model.link_skeletons.iter().map(|s| s.name.as_str()).collect();
        for r in &self.skeletons {
            if !known.insert(r.name.as_str()) {
                return Err(EnvError::DuplicateName(r.name.clone()));
            }
        }
        self.skeletons
            .iter()
            .map(|r| {
                for name in &r.ignores {
                    if !known.contains(name.as_str()) {
                        return Err(EnvError::UnknownIgnore { skeleton: r.name.clone(), name: name.clone() });
                    }
                }
                let frame = frame_id_from_name(model, &r.frame)
                    .ok_or_else(|| EnvError::UnknownFrame { skeleton: r.name.clone(), frame: r.frame.clone() })?;
                Ok(PrimitiveSkeleton::new(r.name.clone(), r.shape())?
                    .with_frame(frame)
                    .with_ignores(r.ignores.iter().cloned()))
            })
            .collect()
    }

    /// World-fixed skeletons ignoring nothing, for robot-free use.
    pub fn world_skeletons(&self) -> Result<Vec<PrimitiveSkeleton>, EnvError> {
        self.skeletons
            .iter()
            .map(|r| {
                if r.frame != "world" {
                    return Err(EnvError::UnknownFrame { skeleton: r.name.clone(), frame: r.frame.clone() });
                }
                Ok(PrimitiveSkeleton::new(r.name.clone(), r.shape())?
                    .with_frame(WORLD_FRAME)
                    .with_ignores(r.ignores.iter().cloned()))
            })
            .collect()
    }
}

#[derive(Serialize)]
struct WireRecord<'a> {
    name: &'a str,
    #[serde(rename = "type")]
    kind: &'a str,
    radius: f64,
    frame: &'a str,
    ignores: &'a [String],
    #[serde(rename = "O")]
    o: [f64; 3],
    #[serde(rename = "P")]
    p: [f64; 3],
    #[serde(rename = "Q")]
    q: [f64; 3],
}

#[derive(Serialize)]
struct WireSnapshot<'a> {
    version: u64,
    base_fixed: bool,
    count: usize,
    design_values: DesignValues,
    skeletons: Vec<WireRecord<'a>>,
}

/// Pretty JSON with every float written to 17 significant digits.
struct SeventeenDigits<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for SeventeenDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Document bytes for `snapshot`. Non-finite numbers are rejected.
pub fn serialize(snapshot: &EnvironmentSnapshot) -> Result<Vec<u8>, EnvError> {
    check_finite(snapshot)?;
    let wire = WireSnapshot {
        version: snapshot.version,
        base_fixed: snapshot.base_fixed,
        count: snapshot.count,
        design_values: snapshot.design_values,
        skeletons: snapshot
            .skeletons
            .iter()
            .map(|r| WireRecord {
                name: &r.name,
                kind: r.kind.as_str(),
                radius: r.radius,
                frame: &r.frame,
                ignores: &r.ignores,
                o: r.o,
                p: r.p,
                q: r.q,
            })
            .collect(),
    };
    let mut out = Vec::new();
    let fmt = SeventeenDigits(serde_json::ser::PrettyFormatter::with_indent(b"  "));
    let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
    wire.serialize(&mut ser).map_err(|e| EnvError::schema("", e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn check_finite(s: &EnvironmentSnapshot) -> Result<(), EnvError> {
    let dv = &s.design_values;
    for (key, v) in [("f_max", dv.f_max), ("d_th", dv.d_th), ("zeta", dv.zeta)] {
        if !v.is_finite() {
            return Err(EnvError::schema(format!("design_values.{key}"), "not finite"));
        }
    }
    for (i, r) in s.skeletons.iter().enumerate() {
        let all = [r.radius].into_iter().chain(r.o).chain(r.p).chain(r.q);
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(EnvError::schema(format!("skeletons[{i}]"), "not finite"));
        }
    }
    Ok(())
}

/// Parses and validates a document, logging any plane repairs.
pub fn deserialize(bytes: &[u8]) -> Result<EnvironmentSnapshot, EnvError> {
    let (snap, warnings) = deserialize_with_warnings(bytes)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(snap)
}

/// Parses and validates a document; plane repairs are returned as messages.
pub fn deserialize_with_warnings(bytes: &[u8]) -> Result<(EnvironmentSnapshot, Vec<String>), EnvError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| EnvError::schema("$", e.to_string()))?;
    let mut warnings = Vec::new();
    let root = object(&value, "$")?;
    only_keys(root, "", &["version", "base_fixed", "count", "design_values", "skeletons"])?;
    let version = field(root, "", "version")?
        .as_u64()
        .ok_or_else(|| EnvError::schema("version", "expected a non-negative integer"))?;
    let base_fixed = field(root, "", "base_fixed")?
        .as_bool()
        .ok_or_else(|| EnvError::schema("base_fixed", "expected a boolean"))?;
    let count = field(root, "", "count")?
        .as_u64()
        .ok_or_else(|| EnvError::schema("count", "expected a non-negative integer"))? as usize;

    let dv = object(field(root, "", "design_values")?, "design_values")?;
    only_keys(dv, "design_values", &["f_max", "d_th", "zeta"])?;
    let design_values = DesignValues {
        f_max: number(field(dv, "design_values", "f_max")?, "design_values.f_max")?,
        d_th: number(field(dv, "design_values", "d_th")?, "design_values.d_th")?,
        zeta: number(field(dv, "design_values", "zeta")?, "design_values.zeta")?,
    };

    let list = field(root, "", "skeletons")?
        .as_array()
        .ok_or_else(|| EnvError::schema("skeletons", "expected an array"))?;
    let mut skeletons = Vec::with_capacity(list.len());
    for (i, item) in list.iter().enumerate() {
        let path = format!("skeletons[{i}]");
        skeletons.push(record(item, &path, &mut warnings)?);
    }
    if count != skeletons.len() {
        return Err(EnvError::schema("count", format!("{count} does not match {} skeletons", skeletons.len())));
    }
    let mut names = BTreeSet::new();
    for (i, r) in skeletons.iter().enumerate() {
        if !names.insert(r.name.as_str()) {
            return Err(EnvError::schema(format!("skeletons[{i}].name"), format!("duplicate name {}", r.name)));
        }
    }
    Ok((EnvironmentSnapshot { version, base_fixed, count, design_values, skeletons }, warnings))
}

fn record(item: &Value, path: &str, warnings: &mut Vec<String>) -> Result<SkeletonRecord, EnvError> {
    let obj = object(item, path)?;
    only_keys(obj, path, &["name", "type", "radius", "frame", "ignores", "O", "P", "Q"])?;
    let text = |key: &str| -> Result<String, EnvError> {
        field(obj, path, key)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| EnvError::schema(format!("{path}.{key}"), "expected a string"))
    };
    let name = text("name")?;
    if name.is_empty() {
        return Err(EnvError::schema(format!("{path}.name"), "empty name"));
    }
    let kind_text = text("type")?;
    let kind = SkeletonKind::parse(&kind_text)
        .ok_or_else(|| EnvError::schema(format!("{path}.type"), format!("unknown type {kind_text}")))?;
    let radius = number(field(obj, path, "radius")?, &format!("{path}.radius"))?;
    if radius < 0.0 {
        return Err(EnvError::schema(format!("{path}.radius"), "negative radius"));
    }
    let frame = text("frame")?;
    if !valid_frame_name(&frame) {
        return Err(EnvError::schema(format!("{path}.frame"), format!("unknown frame {frame}")));
    }
    let ignores = field(obj, path, "ignores")?
        .as_array()
        .ok_or_else(|| EnvError::schema(format!("{path}.ignores"), "expected an array"))?
        .iter()
        .enumerate()
        .map(|(k, v)| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| EnvError::schema(format!("{path}.ignores[{k}]"), "expected a string"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let o = vec3(field(obj, path, "O")?, &format!("{path}.O"))?;
    let p = vec3(field(obj, path, "P")?, &format!("{path}.P"))?;
    let mut q = vec3(field(obj, path, "Q")?, &format!("{path}.Q"))?;
    if kind == SkeletonKind::Plane {
        let (pv, qv) = (Vec3::from(p), Vec3::from(q));
        let denom = pv.norm() * qv.norm();
        if denom > 0.0 {
            let rel = (pv.dot(&qv) / denom).abs();
            if rel > PLANE_REPAIR_TOL {
                let fixed = qv - pv * (pv.dot(&qv) / pv.norm_squared());
                q = [fixed.x, fixed.y, fixed.z];
                if rel > PLANE_WARN_TOL {
                    warnings.push(format!("{path}: plane {name} had P·Q/(|P||Q|) = {rel:.3e}; Q re-orthogonalized"));
                }
            }
        }
    }
    let rec = SkeletonRecord { name, kind, radius, frame, ignores, o, p, q };
    rec.shape()
        .validate(&rec.name)
        .map_err(|e| EnvError::schema(path.to_string(), e.to_string()))?;
    Ok(rec)
}

fn valid_frame_name(s: &str) -> bool {
    match s {
        "world" | "ee" => true,
        _ => s.strip_prefix("joint_").and_then(|k| k.parse::<u32>().ok()).is_some(),
    }
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, EnvError> {
    v.as_object().ok_or_else(|| EnvError::schema(path, "expected an object"))
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value, EnvError> {
    obj.get(key).ok_or_else(|| EnvError::schema(join(path, key), "missing"))
}

fn only_keys(obj: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<(), EnvError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(EnvError::schema(join(path, k), "unknown key")),
        None => Ok(()),
    }
}

fn number(v: &Value, path: &str) -> Result<f64, EnvError> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| EnvError::schema(path, "expected a finite number"))
}

fn vec3(v: &Value, path: &str) -> Result<[f64; 3], EnvError> {
    let arr = v.as_array().filter(|a| a.len() == 3).ok_or_else(|| EnvError::schema(path, "expected 3 numbers"))?;
    let mut out = [0.0; 3];
    for (k, x) in arr.iter().enumerate() {
        out[k] = number(x, &format!("{path}[{k}]"))?;
    }
    Ok(out)
}
