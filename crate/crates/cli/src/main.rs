use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use navagent::agent::mock::{MockBehavior, MockServer};
use navagent::agent::{DecisionCore, RemoteLlmCore, RuleCore, ScriptedCore};
use navagent::colregs::classify;
use navagent::datasets::{self, class_counts, SETD_CLASSES};
use navagent::dynamics::state_from_nav;
use navagent::kinematics::{cpa, wrap_360, LocalPoint, METERS_PER_NM};
use navagent::simulator::{compute_metrics, run, Metrics, ScenarioConfig, SimulationLog};

#[derive(Parser)]
#[command(name = "navagent", version, about = "COLREGs collision-avoidance simulator and dataset tools")]
struct Cli {
    /// print progress to stderr
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its log, plot tables and metrics
    Simulate {
        /// scenario file (`.json` may be omitted)
        config: Option<PathBuf>,
        /// rule | remote | scripted:<file>
        #[arg(long, default_value = "rule")]
        core: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
        /// exit 3 if the own ship passes any target closer than this, nm
        #[arg(long, value_name = "NM")]
        assert_safe: Option<f64>,
        /// run every scenario file in a directory
        #[arg(long, value_name = "DIR", conflicts_with = "config")]
        batch: Option<PathBuf>,
    },
    /// Classify the encounter of two ships given in local meters
    Classify {
        #[arg(long, allow_negative_numbers = true)]
        own_x: f64,
        #[arg(long, allow_negative_numbers = true)]
        own_y: f64,
        #[arg(long)]
        own_course: f64,
        #[arg(long)]
        own_speed: f64,
        #[arg(long, allow_negative_numbers = true)]
        target_x: f64,
        #[arg(long, allow_negative_numbers = true)]
        target_y: f64,
        #[arg(long)]
        target_course: f64,
        #[arg(long)]
        target_speed: f64,
    },
    /// Generate a synthetic dataset
    GenDataset {
        kind: DatasetKind,
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// SETD instants per sampled encounter
        #[arg(long, default_value_t = 1)]
        per_trajectory: usize,
    },
    /// Recompute metrics from a saved log
    Replay {
        log: PathBuf,
        /// compare against the metrics file written next to the log
        #[arg(long)]
        diff: bool,
    },
    /// Serve a mock chat-completion endpoint
    MockServer {
        #[arg(long, default_value = "127.0.0.1:8089")]
        addr: String,
        #[arg(long, value_enum, default_value = "tool-follower")]
        behavior: MockKind,
        /// assistant text for `fixed`, `delay` and `fail-then-ok`
        #[arg(long, default_value = "")]
        reply: String,
        #[arg(long, default_value_t = 0)]
        delay_ms: u64,
        #[arg(long, default_value_t = 2)]
        failures: usize,
        #[arg(long, default_value_t = 500)]
        status: u16,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    Setd,
    Scadd,
}

#[derive(Clone, Copy, ValueEnum)]
enum MockKind {
    Fixed,
    Delay,
    FailThenOk,
    ToolFollower,
}

enum Failure {
    /// bad flags, unreadable or invalid input: exit 2
    Input(String),
    /// a requested check failed: exit 3
    Breach(String),
    /// output could not be written: exit 4
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Breach(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Breach(m) | Failure::Io(m) => m,
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn resolve_config(path: &Path) -> Result<PathBuf> {
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    let mut with_ext = path.as_os_str().to_owned();
    with_ext.push(".json");
    let with_ext = PathBuf::from(with_ext);
    if with_ext.is_file() {
        return Ok(with_ext);
    }
    Err(Failure::Input(format!("scenario file not found: {}", path.display())))
}

fn make_core(spec: &str, config: &ScenarioConfig) -> Result<Box<dyn DecisionCore>> {
    match spec {
        "rule" => Ok(Box::new(RuleCore)),
        "remote" => {
            let remote = config.remote.clone().ok_or_else(|| {
                Failure::Input(format!("scenario `{}` has no `remote` section", config.name))
            })?;
            Ok(Box::new(RemoteLlmCore::new(remote)))
        }
        s => match s.strip_prefix("scripted:") {
            Some(file) => {
                let text = fs::read_to_string(file)
                    .map_err(|e| Failure::Input(format!("{file}: {e}")))?;
                Ok(Box::new(ScriptedCore::from_json(&text).map_err(Failure::Input)?))
            }
            None => Err(Failure::Input(format!(
                "unknown core `{s}`; expected rule, remote or scripted:<file>"
            ))),
        },
    }
}

fn check_core_spec(spec: &str) -> Result<()> {
    if spec == "rule" || spec == "remote" || spec.starts_with("scripted:") {
        Ok(())
    } else {
        Err(Failure::Input(format!(
            "unknown core `{spec}`; expected rule, remote or scripted:<file>"
        )))
    }
}

fn summary(m: &Metrics) -> String {
    let mut s = format!("scenario: {}\n", m.scenario);
    for p in &m.min_distances {
        s.push_str(&format!(
            "  min distance {}-{}: {:.3} nm at {:.1} s\n",
            p.a,
            p.b,
            p.min_distance / METERS_PER_NM,
            p.at
        ));
    }
    s.push_str(&format!("  decisions: {}", m.decisions));
    if m.truncated_decisions + m.degraded_decisions > 0 {
        s.push_str(&format!(
            " ({} truncated, {} degraded)",
            m.truncated_decisions, m.degraded_decisions
        ));
    }
    s.push('\n');
    if let Some(f) = &m.first_avoidance {
        s.push_str(&format!(
            "  first avoidance: {} for target {} ({}) at {:.1} s\n",
            f.maneuver.as_str(),
            f.target,
            f.encounter.as_str(),
            f.t
        ));
    }
    s.push_str(&format!(
        "  COLREGs compliant: {}\n  goal reached: {}",
        if m.colregs_compliant { "yes" } else { "no" },
        match m.goal_time {
            Some(t) => format!("yes, at {t:.1} s"),
            None => "no".into(),
        }
    ));
    s.push_str(&format!("\n  zone incursions: {}", m.zone_incursions));
    s
}

struct RunReport {
    name: String,
    metrics: Metrics,
}

fn simulate_one(
    path: &Path,
    core: &str,
    out: &Path,
    seed: Option<u64>,
    verbose: bool,
) -> Result<RunReport> {
    let path = resolve_config(path)?;
    let mut config = ScenarioConfig::load(&path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let core = make_core(core, &config)?;
    if verbose {
        eprintln!("running {} with the {} core", path.display(), core.name());
    }
    let log = run(&config, core.as_ref()).map_err(|e| Failure::Input(e.to_string()))?;
    let metrics = compute_metrics(&log);

    fs::create_dir_all(out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| config.name.clone());
    let log_path = out.join(format!("{stem}.jsonl"));
    log.save(&log_path).map_err(|e| Failure::Io(e.to_string()))?;
    let csv = |suffix: &str, f: &dyn Fn(BufWriter<fs::File>) -> std::result::Result<(), navagent::simulator::LogError>| {
        let p = out.join(format!("{stem}.{suffix}.csv"));
        let file = fs::File::create(&p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
        f(BufWriter::new(file)).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))
    };
    csv("track", &|w| log.write_track_csv(w))?;
    csv("distance", &|w| log.write_distance_csv(w))?;
    write(&metrics_path(&log_path), &metrics.to_json())?;
    Ok(RunReport {
        name: stem,
        metrics,
    })
}

fn metrics_path(log_path: &Path) -> PathBuf {
    let stem = log_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    log_path.with_file_name(format!("{stem}.metrics.json"))
}

fn assert_safe(report: &RunReport, bound_nm: f64) -> Result<()> {
    match report.metrics.min_own_distance {
        Some(d) if d < bound_nm * METERS_PER_NM => Err(Failure::Breach(format!(
            "{}: minimum own-ship distance {:.3} nm is below {bound_nm} nm",
            report.name,
            d / METERS_PER_NM
        ))),
        _ => Ok(()),
    }
}

fn cmd_simulate(
    config: Option<PathBuf>,
    core: String,
    out: PathBuf,
    seed: Option<u64>,
    bound: Option<f64>,
    batch: Option<PathBuf>,
    verbose: bool,
) -> Result<()> {
    check_core_spec(&core)?;
    if let Some(b) = bound {
        if !(b >= 0.0) {
            return Err(Failure::Input("--assert-safe must be non-negative".into()));
        }
    }
    let reports = match (config, batch) {
        (Some(c), None) => vec![simulate_one(&c, &core, &out, seed, verbose)?],
        (None, Some(dir)) => {
            let mut files: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(Failure::Input(format!("no scenario files in {}", dir.display())));
            }
            files
                .par_iter()
                .map(|f| simulate_one(f, &core, &out, seed, verbose))
                .collect::<Vec<_>>()
                .into_iter()
                .collect::<Result<Vec<_>>>()?
        }
        _ => return Err(Failure::Input("give a scenario file or --batch <dir>".into())),
    };
    for r in &reports {
        println!("{}", summary(&r.metrics));
    }
    if let Some(b) = bound {
        for r in &reports {
            assert_safe(r, b)?;
        }
    }
    Ok(())
}

fn cmd_classify(
    own: (f64, f64, f64, f64),
    target: (f64, f64, f64, f64),
) -> Result<()> {
    if !(own.3 >= 0.0 && target.3 >= 0.0) {
        return Err(Failure::Input("speeds must be non-negative".into()));
    }
    let os = state_from_nav(LocalPoint::new(own.0, own.1), own.2, own.3);
    let ts = state_from_nav(LocalPoint::new(target.0, target.1), target.2, target.3);
    let label = classify(&os, &ts).map_err(|e| Failure::Input(e.to_string()))?;
    let c = cpa((os.pos, os.velocity()), (ts.pos, ts.velocity()));
    println!("{}", label.as_str());
    println!(
        "relative bearing: {:.1} deg; course difference: {:.1} deg; DCPA: {:.2} nm; TCPA: {:.1} min",
        c.relative_bearing.to_degrees(),
        wrap_360(target.2 - own.2),
        c.dcpa / METERS_PER_NM,
        c.tcpa / 60.0
    );
    Ok(())
}

fn cmd_gen_dataset(
    kind: DatasetKind,
    n: usize,
    seed: u64,
    out: Option<PathBuf>,
    per_trajectory: usize,
) -> Result<()> {
    let (text, default_name) = match kind {
        DatasetKind::Setd => {
            let recs = datasets::gen_setd_with(n, seed, per_trajectory)
                .map_err(|e| Failure::Input(e.to_string()))?;
            let counts = class_counts(&recs);
            for (c, k) in SETD_CLASSES.iter().zip(counts) {
                println!("{}: {k}", c.as_str());
            }
            (
                datasets::to_jsonl(&datasets::setd_header(n, seed, per_trajectory), &recs),
                "setd.jsonl",
            )
        }
        DatasetKind::Scadd => {
            let recs = datasets::gen_scadd(n, seed).map_err(|e| Failure::Input(e.to_string()))?;
            println!("records: {}", recs.len());
            (datasets::to_jsonl(&datasets::scadd_header(n, seed), &recs), "scadd.jsonl")
        }
    };
    let out = out.unwrap_or_else(|| PathBuf::from(default_name));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    }
    write(&out, &text)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_replay(log: PathBuf, diff: bool) -> Result<()> {
    let loaded = SimulationLog::load(&log).map_err(|e| Failure::Input(format!("{}: {e}", log.display())))?;
    let metrics = compute_metrics(&loaded);
    let json = metrics.to_json();
    println!("{json}");
    if diff {
        let stored_path = metrics_path(&log);
        let stored = fs::read_to_string(&stored_path)
            .map_err(|e| Failure::Input(format!("{}: {e}", stored_path.display())))?;
        if stored != json {
            return Err(Failure::Breach(format!(
                "replayed metrics differ from {}",
                stored_path.display()
            )));
        }
        eprintln!("metrics match {}", stored_path.display());
    }
    Ok(())
}

fn cmd_mock(addr: String, kind: MockKind, reply: String, delay_ms: u64, failures: usize, status: u16) -> Result<()> {
    let behavior = match kind {
        MockKind::Fixed => MockBehavior::Fixed(reply),
        MockKind::Delay => MockBehavior::Delay {
            delay: Duration::from_millis(delay_ms),
            reply,
        },
        MockKind::FailThenOk => MockBehavior::FailThenOk {
            failures,
            status,
            reply,
        },
        MockKind::ToolFollower => MockBehavior::ToolFollower,
    };
    let server = MockServer::bind(&addr, behavior).map_err(|e| Failure::Io(format!("{addr}: {e}")))?;
    println!("serving {}", server.url());
    server.join();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            core,
            out,
            seed,
            assert_safe,
            batch,
        } => cmd_simulate(config, core, out, seed, assert_safe, batch, cli.verbose),
        Command::Classify {
            own_x,
            own_y,
            own_course,
            own_speed,
            target_x,
            target_y,
            target_course,
            target_speed,
        } => cmd_classify(
            (own_x, own_y, own_course, own_speed),
            (target_x, target_y, target_course, target_speed),
        ),
        Command::GenDataset {
            kind,
            n,
            seed,
            out,
            per_trajectory,
        } => cmd_gen_dataset(kind, n, seed, out, per_trajectory),
        Command::Replay { log, diff } => cmd_replay(log, diff),
        Command::MockServer {
            addr,
            behavior,
            reply,
            delay_ms,
            failures,
            status,
        } => cmd_mock(addr, behavior, reply, delay_ms, failures, status),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
