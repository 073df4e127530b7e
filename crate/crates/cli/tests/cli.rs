use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn psg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psg")).args(args).env_remove("PSG_ENV_DIR").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn env_doc(skeletons: Vec<Value>) -> Value {
    json!({
        "version": 1,
        "base_fixed": true,
        "count": skeletons.len(),
        "design_values": { "f_max": 30.0, "d_th": 0.06, "zeta": 0.2 },
        "skeletons": skeletons,
    })
}

fn skeleton(name: &str, kind: &str, radius: f64, o: [f64; 3], p: [f64; 3], q: [f64; 3]) -> Value {
    json!({ "name": name, "type": kind, "radius": radius, "frame": "world", "ignores": [], "O": o, "P": p, "Q": q })
}

fn write_json(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_vec_pretty(v).unwrap()).unwrap();
}

const CUBE_OBJ: &str = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n";

#[test]
fn abstract_cube_gives_six_planes() {
    let dir = tempfile::tempdir().unwrap();
    let meshes = dir.path().join("meshes");
    fs::create_dir(&meshes).unwrap();
    fs::write(meshes.join("cube.obj"), CUBE_OBJ).unwrap();
    let out = dir.path().join("env.json");
    let o = psg(&["abstract", "--meshes", meshes.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("abox"));
    let doc: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(doc["count"], 6);
    assert!(doc["skeletons"].as_array().unwrap().iter().all(|s| s["type"] == "plane"));
}

#[test]
fn abstract_empty_dir_and_bad_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env.json");
    let o = psg(&["abstract", "--meshes", dir.path().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(doc["count"], 0);

    fs::write(dir.path().join("broken.obj"), "v 0 0\nf 1 2 3\n").unwrap();
    let o = psg(&["abstract", "--meshes", dir.path().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken"));
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = psg(&["run", "--scenario", "nope", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("damping_sweep") && err.contains("Usage:"), "{err}");
    let o = psg(&["run", "--scenario", "joint_limit", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn same_seed_same_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = psg(&["run", "--scenario", "joint_limit", "--seed", "7", "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    for name in ["joint_limit.csv", "summary.json"] {
        let (x, y) = (fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn damping_sweep_flags_the_undamped_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = psg(&["--json", "run", "--scenario", "damping_sweep", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csvs = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 5);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let runs = v["summary"]["runs"].as_array().unwrap();
    for r in runs {
        assert_eq!(r["colliding"].as_bool().unwrap(), r["zeta"].as_f64().unwrap() == 0.0, "{r}");
    }
}

#[test]
fn query_reports_distance_and_exclusions() {
    let dir = tempfile::tempdir().unwrap();
    let env = dir.path().join("env.json");
    write_json(
        &env,
        &env_doc(vec![
            skeleton("a", "point", 0.1, [0.0, 0.0, 0.0], [0.0; 3], [0.0; 3]),
            skeleton("b", "point", 0.2, [1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]),
        ]),
    );
    let e = env.to_str().unwrap();
    let o = psg(&["--json", "query", "--env", e, "--a", "a", "--b", "b"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["surface_distance"].as_f64().unwrap() - 0.7).abs() < 1e-12);
    assert!((v["center_distance"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["status"], "structurally excluded");

    let o = psg(&["query", "--env", e, "--a", "a", "--b", "ee"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("evaluated"));

    let o = psg(&["query", "--env", e, "--a", "a", "--b", "nobody"]);
    assert_eq!(o.status.code(), Some(2));
    let o = psg(&["query", "--env", e, "--a", "a", "--b", "ee", "--q", "0,0,0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn query_reports_ignored_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let env = dir.path().join("env.json");
    let mut s = skeleton("post", "point", 0.05, [0.5, 0.5, 0.5], [0.0; 3], [0.0; 3]);
    s["ignores"] = json!(["ee"]);
    write_json(&env, &env_doc(vec![s]));
    let o = psg(&["query", "--env", env.to_str().unwrap(), "--a", "ee", "--b", "post", "--q", "0,0.2,0,-0.785,0,-2.356,0,1.57,0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("ignored by list"));
}

#[test]
fn validate_repairs_skewed_planes_and_rejects_bad_frames() {
    let dir = tempfile::tempdir().unwrap();
    let env = dir.path().join("env.json");
    write_json(&env, &env_doc(vec![skeleton("floor", "plane", 0.0, [0.0, 0.0, -0.1], [2.0, 0.0, 0.0], [0.3, 2.0, 0.0])]));
    let o = psg(&["validate", "--env", env.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("warning"));

    let mut bad = skeleton("hover", "point", 0.1, [0.0; 3], [0.0; 3], [0.0; 3]);
    bad["frame"] = json!("joint_42");
    write_json(&env, &env_doc(vec![bad]));
    assert_eq!(psg(&["validate", "--env", env.to_str().unwrap()]).status.code(), Some(2));

    fs::write(&env, "{\"version\": 1}").unwrap();
    assert_eq!(psg(&["validate", "--env", env.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn publish_needs_a_store_and_then_feeds_run() {
    let dir = tempfile::tempdir().unwrap();
    let env = dir.path().join("env.json");
    write_json(&env, &env_doc(vec![skeleton("far", "point", 0.1, [5.0, 5.0, 5.0], [0.0; 3], [0.0; 3])]));
    let e = env.to_str().unwrap();
    assert_eq!(psg(&["publish", "--env", e]).status.code(), Some(2));

    let store = dir.path().join("store");
    let o = psg(&["publish", "--env", e, "--env-dir", store.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let before = fs::read(&env).unwrap();
    // republishing the same version is a regression
    assert_eq!(psg(&["publish", "--env", e, "--env-dir", store.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(fs::read(&env).unwrap(), before);

    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_psg"))
        .args(["run", "--scenario", "joint_limit", "--out", out.to_str().unwrap()])
        .env("PSG_ENV_DIR", &store)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains(" pairs (") && !text.contains("126 pairs"), "{text}");
}

#[test]
fn bench_prints_the_comparison_line() {
    let o = psg(&["bench", "--repeats", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("7.45 us"));
    assert!(text.contains("total"));

    let o = psg(&["--json", "bench", "--repeats", "50", "--scale-series"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["series"].as_array().unwrap().len(), 5);
    assert!(v["fit"]["slope"].is_number());
    assert_eq!(psg(&["bench", "--repeats", "0"]).status.code(), Some(2));
}
