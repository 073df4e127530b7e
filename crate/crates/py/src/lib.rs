//! Python module `psg`: distance queries, field shape functions, forward
//! kinematics of the reference robot, environment validation and scenarios.

use std::path::PathBuf;

use psg_core::apf;
use psg_core::envstore::deserialize_with_warnings;
use psg_core::geometry::{self, PrimitiveSkeleton, Shape, SkeletonKind, Vec3};
use psg_core::kinematics::reference::{home_q as reference_home, reference_model};
use psg_core::kinematics::forward_kinematics as fk;
use psg_core::sim::{run_scenario as run, ScenarioOptions, SCENARIO_IDS};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Skeleton from a mapping with keys `type`, `radius`, `O` and optionally `P`, `Q`.
fn skeleton_from(name: &str, d: &Bound<'_, PyDict>) -> PyResult<PrimitiveSkeleton> {
    let get = |k: &str| -> PyResult<Option<[f64; 3]>> {
        d.get_item(k)?.map(|v| v.extract::<[f64; 3]>()).transpose()
    };
    let kind: String = d.get_item("type")?.ok_or_else(|| value_err(format!("{name}: missing 'type'")))?.extract()?;
    let kind = SkeletonKind::parse(&kind).ok_or_else(|| value_err(format!("{name}: unknown type {kind:?}")))?;
    let radius: f64 = d.get_item("radius")?.map(|v| v.extract()).transpose()?.unwrap_or(0.0);
    let origin = v3(get("O")?.ok_or_else(|| value_err(format!("{name}: missing 'O'")))?);
    let p = v3(get("P")?.unwrap_or([0.0; 3]));
    let q = v3(get("Q")?.unwrap_or([0.0; 3]));
    let shape = match kind {
        SkeletonKind::Point => Shape::point(origin, radius),
        SkeletonKind::Line => Shape::line(origin, p, radius),
        SkeletonKind::Plane => Shape::plane(origin, p, q, radius),
    };
    PrimitiveSkeleton::new(name, shape).map_err(value_err)
}

/// Closest points between two world-frame skeletons given as dicts.
#[pyfunction]
fn closest_points<'py>(py: Python<'py>, a: &Bound<'py, PyDict>, b: &Bound<'py, PyDict>) -> PyResult<Bound<'py, PyDict>> {
    let (sa, sb) = (skeleton_from("a", a)?, skeleton_from("b", b)?);
    let r = geometry::closest_points(&sa, &sb).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("U", arr(&r.u))?;
    out.set_item("W", arr(&r.w))?;
    out.set_item("s_a", r.s_i)?;
    out.set_item("t_a", r.t_i)?;
    out.set_item("s_b", r.s_j)?;
    out.set_item("t_b", r.t_j)?;
    out.set_item("center_distance", r.center_distance)?;
    out.set_item("surface_distance", r.surface_distance)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (d, f_max = 30.0, d_th = 0.06))]
fn potential(d: f64, f_max: f64, d_th: f64) -> f64 {
    apf::potential(d, f_max, d_th)
}

/// Derivative of the potential with respect to distance (non-positive).
#[pyfunction]
#[pyo3(signature = (d, f_max = 30.0, d_th = 0.06))]
fn repelling_force(d: f64, f_max: f64, d_th: f64) -> f64 {
    apf::repelling_force(d, f_max, d_th)
}

#[pyfunction]
#[pyo3(signature = (d, f_max = 30.0, d_th = 0.06))]
fn stiffness(d: f64, f_max: f64, d_th: f64) -> f64 {
    apf::stiffness(d, f_max, d_th)
}

#[pyfunction]
fn home_q() -> Vec<f64> {
    reference_home()
}

/// Frame origins and tool point of the reference robot at `q`.
#[pyfunction]
#[pyo3(signature = (q = None))]
fn forward_kinematics<'py>(py: Python<'py>, q: Option<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let model = reference_model();
    let q = q.unwrap_or_else(reference_home);
    let kin = fk(&model, &q).map_err(value_err)?;
    let out = PyDict::new(py);
    let origins: Vec<[f64; 3]> = kin.frames.iter().map(|f| arr(&f.translation)).collect();
    out.set_item("frames", origins)?;
    out.set_item("tcp", arr(&kin.tcp(&model)))?;
    Ok(out)
}

/// Parses an environment document and checks it against the reference robot.
/// Returns `(count, warnings)`.
#[pyfunction]
fn validate_env(text: &str) -> PyResult<(usize, Vec<String>)> {
    let (snap, warnings) = deserialize_with_warnings(text.as_bytes()).map_err(value_err)?;
    let skeletons = snap.to_skeletons(&reference_model()).map_err(value_err)?;
    Ok((skeletons.len(), warnings))
}

/// Runs a built-in scenario and returns its summary as a dict.
#[pyfunction]
#[pyo3(signature = (id, out_dir = None, zeta = None, seed = 0))]
fn run_scenario<'py>(
    py: Python<'py>,
    id: &str,
    out_dir: Option<PathBuf>,
    zeta: Option<f64>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = ScenarioOptions { zeta, seed, ..ScenarioOptions::default() };
    let outcome = py.detach(|| run(id, &opts)).map_err(value_err)?;
    if let Some(dir) = out_dir {
        outcome.write(&dir).map_err(value_err)?;
    }
    let text = outcome.summary_json().map_err(value_err)?;
    let summary = py.import("json")?.call_method1("loads", (text,))?;
    summary.set_item("passed", outcome.passed())?;
    Ok(summary)
}

#[pymodule]
fn psg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SCENARIOS", SCENARIO_IDS.to_vec())?;
    m.add_function(wrap_pyfunction!(closest_points, m)?)?;
    m.add_function(wrap_pyfunction!(potential, m)?)?;
    m.add_function(wrap_pyfunction!(repelling_force, m)?)?;
    m.add_function(wrap_pyfunction!(stiffness, m)?)?;
    m.add_function(wrap_pyfunction!(home_q, m)?)?;
    m.add_function(wrap_pyfunction!(forward_kinematics, m)?)?;
    m.add_function(wrap_pyfunction!(validate_env, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
