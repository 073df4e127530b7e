use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use psg_core::apf::{AvoidanceField, ApfConfig};
use psg_core::envstore::{deserialize_with_warnings, serialize, EnvStore, EnvironmentSnapshot, ENV_DIR_VAR};
use psg_core::geometry::{closest_points, PrimitiveSkeleton, Vec3};
use psg_core::kinematics::reference::{home_q, reference_environment, reference_model};
use psg_core::kinematics::{frame_name, update_skeleton_states, RobotModel};
use psg_core::ral::{abstract_environment, load_mesh_dir, PrimitiveCosts, PrimitiveKind, RalConfig};
use psg_core::sim::{benchmark_iteration, run_scenario, scaling_series, ScenarioOptions, SCENARIO_IDS};
use serde_json::{json, Value};

/// Mean iteration time reported for the original implementation.
const PUBLISHED_MEAN_US: f64 = 7.45;
const SERIES_SIZES: [usize; 5] = [10, 20, 40, 80, 160];

#[derive(Parser)]
#[command(name = "psg", version, about = "Primitive-skeleton collision avoidance toolkit")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit primitives to a directory of meshes and write an environment document.
    Abstract(AbstractArgs),
    /// Publish an environment document into the store directory.
    Publish(PublishArgs),
    /// Run a scripted scenario on the reference robot.
    Run(RunArgs),
    /// Distance between two named skeletons at a configuration.
    Query(QueryArgs),
    /// Time the avoidance computation.
    Bench(BenchArgs),
    /// Check an environment document against the schema and the reference robot.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct AbstractArgs {
    #[arg(long)]
    meshes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Primitive costs as c_abox,c_obox,c_sph,c_cap.
    #[arg(long)]
    costs: Option<String>,
    /// Reachable workspace sphere as cx,cy,cz,r.
    #[arg(long)]
    workspace: Option<String>,
    #[arg(long, default_value_t = 1)]
    version: u64,
}

#[derive(Args)]
struct StoreArgs {
    /// Store directory.
    #[arg(long, env = ENV_DIR_VAR)]
    env_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PublishArgs {
    #[arg(long)]
    env: PathBuf,
    #[command(flatten)]
    store: StoreArgs,
    /// Documents kept in the store.
    #[arg(long, default_value_t = 8)]
    keep: usize,
}

#[derive(Args)]
struct RunArgs {
    /// One of the built-in scenario ids.
    #[arg(long)]
    scenario: String,
    /// Environment document; defaults to the store's latest, then the built-in bench.
    #[arg(long)]
    env: Option<PathBuf>,
    #[command(flatten)]
    store: StoreArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    /// Joint values q0,...,q8; defaults to the home posture.
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Environment document; defaults to the built-in bench.
    #[arg(long)]
    env: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    repeats: usize,
    /// Also time random environments of growing size and fit a line.
    #[arg(long)]
    scale_series: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    env: PathBuf,
}

/// Exit status plus message.
struct Failure {
    code: u8,
    msg: String,
}

fn input(msg: impl std::fmt::Display) -> Failure {
    Failure { code: 2, msg: msg.to_string() }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Command::Abstract(a) => cmd_abstract(a, cli.json),
        Command::Publish(a) => cmd_publish(a, cli.json),
        Command::Run(a) => cmd_run(a, cli.json),
        Command::Query(a) => cmd_query(a, cli.json),
        Command::Bench(a) => cmd_bench(a, cli.json),
        Command::Validate(a) => cmd_validate(a, cli.json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn parse_floats(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| input(format!("{what}: cannot parse {s:?} as a number"))))
        .collect()
}

fn read_env(path: &Path) -> Result<(EnvironmentSnapshot, Vec<String>), Failure> {
    let bytes = fs::read(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    deserialize_with_warnings(&bytes).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn env_skeletons(snap: &EnvironmentSnapshot, model: &RobotModel, origin: &str) -> Result<Vec<PrimitiveSkeleton>, Failure> {
    snap.to_skeletons(model).map_err(|e| input(format!("{origin}: {e}")))
}

fn cmd_abstract(a: &AbstractArgs, json_out: bool) -> CmdResult {
    let costs = match &a.costs {
        Some(text) => PrimitiveCosts::parse(text).map_err(input)?,
        None => PrimitiveCosts::default(),
    };
    let workspace = match &a.workspace {
        Some(text) => match parse_floats(text, "--workspace")?.as_slice() {
            &[x, y, z, r] if r > 0.0 => Some((Vec3::new(x, y, z), r)),
            _ => return Err(input("--workspace expects cx,cy,cz,r with r > 0")),
        },
        None => None,
    };
    let meshes = load_mesh_dir(&a.meshes).map_err(input)?;
    let cfg = RalConfig { workspace, version: a.version, ..RalConfig::default() };
    let out = abstract_environment(&meshes, &|_| true, &costs, &cfg);
    let bytes = serialize(&out.snapshot).map_err(input)?;
    fs::write(&a.out, bytes).map_err(|e| input(format!("{}: {e}", a.out.display())))?;

    let kinds = PrimitiveKind::ALL;
    if json_out {
        let reports: Vec<Value> = out
            .reports
            .iter()
            .map(|r| {
                let scores: serde_json::Map<String, Value> =
                    kinds.iter().zip(r.scores).map(|(k, s)| (k.as_str().to_string(), finite_or_null(s))).collect();
                json!({
                    "mesh": r.mesh,
                    "volume": r.volume,
                    "scores": scores,
                    "selected": r.selected.map(|k| k.as_str()),
                    "skeletons": r.skeletons,
                    "note": r.note,
                })
            })
            .collect();
        print_json(&json!({ "out": a.out, "count": out.snapshot.count, "meshes": reports }));
        return Ok(());
    }
    let mut table = format!("{:<20} {:>10}", "mesh", "volume");
    for k in kinds {
        let _ = write!(table, " {:>10}", k.as_str());
    }
    let _ = write!(table, "  {:<8} {:>5}", "selected", "n_ps");
    println!("{table}");
    for r in &out.reports {
        let mut line = format!("{:<20} {:>10.5}", r.mesh, r.volume);
        for s in r.scores {
            let _ = if s.is_finite() { write!(line, " {s:>10.5}") } else { write!(line, " {:>10}", "-") };
        }
        let sel = r.selected.map_or("-", |k| k.as_str());
        let _ = write!(line, "  {sel:<8} {:>5}", r.skeletons);
        if let Some(note) = &r.note {
            let _ = write!(line, "  ({note})");
        }
        println!("{line}");
    }
    println!("wrote {} skeletons to {}", out.snapshot.count, a.out.display());
    Ok(())
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn open_store(s: &StoreArgs, keep: usize) -> Result<Option<EnvStore>, Failure> {
    s.store_dir().map(|d| EnvStore::open(d, keep).map_err(input)).transpose()
}

impl StoreArgs {
    fn store_dir(&self) -> Option<&Path> {
        self.env_dir.as_deref()
    }
}

fn cmd_publish(a: &PublishArgs, json_out: bool) -> CmdResult {
    let (snap, warnings) = read_env(&a.env)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    env_skeletons(&snap, &reference_model(), &a.env.display().to_string())?;
    let store = open_store(&a.store, a.keep)?.ok_or_else(|| input(format!("no store directory: pass --env-dir or set {ENV_DIR_VAR}")))?;
    let path = store.publish(&snap).map_err(input)?;
    if json_out {
        print_json(&json!({ "version": snap.version, "path": path, "count": snap.count }));
    } else {
        println!("published version {} ({} skeletons) to {}", snap.version, snap.count, path.display());
    }
    Ok(())
}

fn cmd_run(a: &RunArgs, json_out: bool) -> CmdResult {
    if !SCENARIO_IDS.contains(&a.scenario.as_str()) {
        let mut cmd = Cli::command();
        let run = cmd.find_subcommand_mut("run").expect("run subcommand exists");
        let msg = format!("unknown scenario {:?}; available: {}", a.scenario, SCENARIO_IDS.join(", "));
        run.error(ErrorKind::InvalidValue, msg).exit();
    }
    let model = reference_model();
    let env = match (&a.env, open_store(&a.store, 8)?) {
        (Some(path), _) => {
            let (snap, _) = read_env(path)?;
            Some(env_skeletons(&snap, &model, &path.display().to_string())?)
        }
        (None, Some(store)) => match store.latest().map_err(input)? {
            Some(snap) => Some(env_skeletons(&snap, &model, &store.dir().display().to_string())?),
            None => None,
        },
        (None, None) => None,
    };
    let opts = ScenarioOptions { env, zeta: a.zeta, seed: a.seed, bench_repeats: None };
    let outcome = run_scenario(&a.scenario, &opts).map_err(input)?;
    let written = outcome.write(&a.out).map_err(input)?;
    if json_out {
        let summary: Value = serde_json::from_str(&outcome.summary_json().map_err(input)?).expect("summary is json");
        print_json(&json!({ "passed": outcome.passed(), "summary": summary, "written": written }));
    } else {
        println!("scenario {} on {} pairs ({} skeletons)", outcome.id, outcome.pairs, outcome.skeletons);
        for r in &outcome.runs {
            let label = if r.label.is_empty() { "run" } else { r.label.as_str() };
            let mut line = format!("  {label:<12} min d {:>9.5} m", r.min_surface_distance);
            if let Some(d) = r.min_tracked_distance {
                let _ = write!(line, "  tracked {d:>9.5} m{}", if r.colliding { " COLLIDING" } else { "" });
            }
            if let (Some(i), Some(o)) = (r.entry_speed, r.exit_speed) {
                let _ = write!(line, "  entry {i:.3} exit {o:.3} m/s");
            }
            if let Some(s) = r.sign_agreement {
                let _ = write!(line, "  sign agreement {:.1} %", 100.0 * s);
            }
            println!("{line}");
        }
        if let Some(b) = &outcome.bench {
            println!(
                "  mean {:.2} us, p99 {:.2} us (published {PUBLISHED_MEAN_US} us); slope {:.3} us/skeleton, R² {:.4}",
                b.reference.total.mean_us, b.reference.total.p99_us, b.fit.slope, b.fit.r2
            );
        }
        for c in &outcome.checks {
            println!("  [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
        }
        println!("wrote {} files to {}", written.len(), a.out.display());
    }
    if outcome.passed() {
        Ok(())
    } else {
        let names: Vec<&str> = outcome.failed_checks().iter().map(|c| c.name.as_str()).collect();
        Err(Failure { code: 3, msg: format!("invariant violated: {}", names.join("; ")) })
    }
}

fn cmd_query(a: &QueryArgs, json_out: bool) -> CmdResult {
    let model = reference_model();
    let q = match &a.q {
        Some(text) => parse_floats(text, "--q")?,
        None => home_q(),
    };
    if q.len() != model.n_joints() {
        return Err(input(format!("--q needs {} values, got {}", model.n_joints(), q.len())));
    }
    let (snap, _) = read_env(&a.env)?;
    let mut all = model.link_skeletons.clone();
    all.extend(env_skeletons(&snap, &model, &a.env.display().to_string())?);
    let world = update_skeleton_states(&model, &q, &all).map_err(input)?;
    let find = |name: &str| world.iter().find(|s| s.name == name).ok_or_else(|| input(format!("unknown skeleton {name:?}")));
    let (sa, sb) = (find(&a.a)?, find(&a.b)?);
    let status = if sa.frame_id == sb.frame_id {
        "structurally excluded"
    } else if sa.ignores(&sb.name) || sb.ignores(&sa.name) {
        "ignored by list"
    } else {
        "evaluated"
    };
    let r = closest_points(sa, sb).map_err(input)?;
    let v = |x: &Vec3| [x.x, x.y, x.z];
    if json_out {
        print_json(&json!({
            "a": sa.name, "b": sb.name,
            "frame_a": frame_name(&model, sa.frame_id), "frame_b": frame_name(&model, sb.frame_id),
            "status": status,
            "U": v(&r.u), "W": v(&r.w),
            "s_a": r.s_i, "t_a": r.t_i, "s_b": r.s_j, "t_b": r.t_j,
            "center_distance": r.center_distance,
            "surface_distance": r.surface_distance,
        }));
    } else {
        println!("{} ({}) / {} ({}): {status}", sa.name, frame_name(&model, sa.frame_id), sb.name, frame_name(&model, sb.frame_id));
        println!("U = [{:.6}, {:.6}, {:.6}]", r.u.x, r.u.y, r.u.z);
        println!("W = [{:.6}, {:.6}, {:.6}]", r.w.x, r.w.y, r.w.z);
        println!("s_a = {:.6}, t_a = {:.6}, s_b = {:.6}, t_b = {:.6}", r.s_i, r.t_i, r.s_j, r.t_j);
        println!("center distance = {:.6} m", r.center_distance);
        println!("surface distance d = {:.6} m", r.surface_distance);
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs, json_out: bool) -> CmdResult {
    let model = reference_model();
    let env = match &a.env {
        Some(path) => {
            let (snap, _) = read_env(path)?;
            env_skeletons(&snap, &model, &path.display().to_string())?
        }
        None => reference_environment(),
    };
    if a.repeats == 0 {
        return Err(input("--repeats must be positive"));
    }
    let q = home_q();
    let cfg = ApfConfig::default();
    let rep = benchmark_iteration(&model, &env, &q, a.repeats, &cfg).map_err(input)?;
    let series = if a.scale_series {
        Some(scaling_series(&model, &q, &SERIES_SIZES, a.repeats, a.seed, &cfg).map_err(input)?)
    } else {
        None
    };
    if json_out {
        let (points, fit) = series.map_or((None, None), |(p, f)| (Some(p), Some(f)));
        print_json(&json!({
            "pairs": rep.pairs,
            "skeletons": rep.skeletons,
            "published_mean_us": PUBLISHED_MEAN_US,
            "total": rep.total, "state": rep.state, "field": rep.field,
            "series": points, "fit": fit,
        }));
        return Ok(());
    }
    println!("{} skeletons, {} pairs, {} repeats", rep.skeletons, rep.pairs, a.repeats);
    println!("{:<8} {:>10} {:>10} {:>10} {:>10}", "phase", "mean us", "p50 us", "p99 us", "max us");
    for (name, t) in [("state", rep.state), ("field", rep.field), ("total", rep.total)] {
        println!("{name:<8} {:>10.3} {:>10.3} {:>10.3} {:>10.3}", t.mean_us, t.p50_us, t.p99_us, t.max_us);
    }
    println!("published reference: {PUBLISHED_MEAN_US} us mean per iteration (different scene and hardware)");
    if let Some((points, fit)) = series {
        println!("{:>8} {:>8} {:>10}", "env n", "pairs", "us");
        for p in &points {
            println!("{:>8} {:>8} {:>10.3}", p.env_skeletons, p.pairs, p.robust_us);
        }
        println!("linear fit: {:.4} us per skeleton + {:.3} us, R² {:.4}", fit.slope, fit.intercept, fit.r2);
    }
    Ok(())
}

fn cmd_validate(a: &ValidateArgs, json_out: bool) -> CmdResult {
    let (snap, warnings) = read_env(&a.env)?;
    let model = reference_model();
    let skeletons = env_skeletons(&snap, &model, &a.env.display().to_string())?;
    let field = AvoidanceField::new(&model, &skeletons, &ApfConfig::default()).map_err(input)?;
    if json_out {
        print_json(&json!({
            "valid": true,
            "version": snap.version,
            "count": snap.count,
            "pairs": field.pairs().len(),
            "warnings": warnings,
        }));
    } else {
        for w in &warnings {
            println!("warning: {w}");
        }
        println!(
            "{}: valid, version {}, {} skeletons, {} pairs with the reference robot",
            a.env.display(),
            snap.version,
            snap.count,
            field.pairs().len()
        );
    }
    Ok(())
}
