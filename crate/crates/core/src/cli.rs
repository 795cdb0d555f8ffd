//! `finops` command line: serve, ask, eval, seed and validate.
//!
//! Exit codes: 0 ok, 1 invalid query, 2 startup failure, 3 session did not
//! complete, 4 benchmark column incomplete, 64 usage error, 66 missing or
//! unreadable input.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::json;

use crate::agent::api::{self, BackendFactory, SessionHub};
use crate::agent::{persist_run, run_session, timestamp_now, Limits, SessionDeps, SessionEvent, SessionTranscript};
use crate::assets;
use crate::eval::{run_benchmark, write_report, BenchBackend, BenchmarkConfig, BenchmarkEnv, EvalConfig, EvalConfigError, GroundTruth};
use crate::gateway::server::{self, GatewayConfig, DEFAULT_ADDR, DEFAULT_FIXTURES_PATH, DEFAULT_SCHEMA_PATH};
use crate::gateway::LocalGateway;
use crate::llm::BackendSpec;
use crate::nl2graphql::{load_bank, Exemplar};
use crate::schema::{default_aliases_path, load_schema, parse_query, validate_query, ValidationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_STARTUP: i32 = 2;
pub const EXIT_INCOMPLETE_SESSION: i32 = 3;
pub const EXIT_PARTIAL_EVAL: i32 = 4;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_NO_INPUT: i32 = 66;

#[derive(Debug, Parser)]
#[command(name = "finops", version, about = "FinOps agent over a federated GraphQL gateway")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Unified SDL file; `aliases.json` beside it is picked up.
    #[arg(long, global = true, env = "SCHEMA_PATH")]
    pub schema: Option<PathBuf>,
    /// Directory holding turbonomic.json and apptio.json.
    #[arg(long, global = true, env = "FIXTURES_PATH")]
    pub fixtures: Option<PathBuf>,
    /// Exemplar bank; the built-in bank when omitted.
    #[arg(long, global = true, env = "EXEMPLARS_PATH")]
    pub exemplars: Option<PathBuf>,
    /// `scripted:<path>` or `http`.
    #[arg(long, global = true)]
    pub backend: Option<BackendSpec>,
    /// Backend for follow-up sessions under `serve`.
    #[arg(long, global = true)]
    pub followup_backend: Option<BackendSpec>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n_runs: Option<usize>,
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the gateway and the session API until interrupted.
    Serve {
        #[arg(long, env = "GATEWAY_ADDR", default_value = DEFAULT_ADDR)]
        addr: String,
    },
    /// Run one session and write its transcript and records.
    Ask { query: String },
    /// Run the benchmark described by an eval config.
    Eval {
        #[arg(long, default_value = "eval.toml")]
        config: PathBuf,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Write the shipped schema, fixtures, scripts and configs into a directory.
    Seed {
        #[arg(default_value = ".")]
        dir: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Validate a GraphQL query file against the unified schema.
    Validate { query_file: PathBuf },
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl ToString) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

type Outcome = Result<i32, Failure>;

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.global.verbose);
    let result = match &cli.command {
        Command::Serve { addr } => cmd_serve(&cli.global, addr),
        Command::Ask { query } => cmd_ask(&cli.global, query),
        Command::Eval { config, parallelism } => cmd_eval(&cli.global, config, *parallelism),
        Command::Seed { dir, force } => cmd_seed(dir, *force),
        Command::Validate { query_file } => cmd_validate(&cli.global, query_file),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn schema_path(g: &GlobalArgs) -> PathBuf {
    g.schema.clone().unwrap_or_else(|| DEFAULT_SCHEMA_PATH.into())
}

fn fixtures_path(g: &GlobalArgs) -> PathBuf {
    g.fixtures.clone().unwrap_or_else(|| DEFAULT_FIXTURES_PATH.into())
}

fn load_gateway(schema: &Path, fixtures: &Path) -> Result<LocalGateway, Failure> {
    GatewayConfig {
        schema_path: schema.to_path_buf(),
        fixtures_path: fixtures.to_path_buf(),
        ..GatewayConfig::default()
    }
    .load()
    .map_err(|e| fail(EXIT_STARTUP, e))
}

fn load_exemplars(g: &GlobalArgs, gw: &LocalGateway) -> Result<Vec<Exemplar>, Failure> {
    let text = match &g.exemplars {
        Some(p) => std::fs::read_to_string(p).map_err(|e| fail(EXIT_NO_INPUT, format!("{}: {e}", p.display())))?,
        None => assets::EXEMPLAR_BANK_JSON.to_string(),
    };
    load_bank(&text, &gw.schema).map_err(|e| fail(EXIT_STARTUP, e))
}

fn factory(spec: &BackendSpec) -> BackendFactory {
    let spec = spec.clone();
    Arc::new(move || spec.build())
}

/// Builds once so a bad script path or missing endpoint fails at startup.
fn preflight(spec: &BackendSpec) -> Result<BackendFactory, Failure> {
    spec.build().map_err(|e| fail(EXIT_STARTUP, format!("backend {spec}: {e}")))?;
    Ok(factory(spec))
}

fn limits(g: &GlobalArgs) -> Result<Limits, Failure> {
    match g.max_iterations {
        Some(0) => Err(fail(EXIT_USAGE, "--max-iterations must be at least 1")),
        Some(n) => Ok(Limits { max_iterations: n }),
        None => Ok(Limits::default()),
    }
}

fn cmd_validate(g: &GlobalArgs, query_file: &Path) -> Outcome {
    let text = std::fs::read_to_string(query_file)
        .map_err(|e| fail(EXIT_NO_INPUT, format!("{}: {e}", query_file.display())))?;
    let sp = schema_path(g);
    let aliases = Some(default_aliases_path(&sp)).filter(|p| p.is_file());
    let schema = load_schema(&sp, aliases.as_deref()).map_err(|e| fail(EXIT_STARTUP, e))?;
    let report = match parse_query(&text) {
        Ok(doc) => validate_query(&doc, &schema),
        Err(e) => ValidationReport::from_parse_error(&e),
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    for e in &report.errors {
        eprintln!("{e}");
    }
    Ok(if report.valid { EXIT_OK } else { EXIT_INVALID })
}

fn trace(ev: &SessionEvent) {
    match ev {
        SessionEvent::StageMarker { stage } => eprintln!("== {}", stage.as_str()),
        SessionEvent::Plan { plan } => eprintln!("{}", plan.render()),
        SessionEvent::Iteration { iteration } => {
            let what = match &iteration.query {
                Some(q) => q.clone(),
                None => serde_json::to_string(&iteration.action).unwrap_or_default(),
            };
            let ok = iteration.observation.as_ref().map(|o| !o.is_error()).unwrap_or(false);
            eprintln!("[{}] {} -> {}", iteration.index, what, if ok { "ok" } else { "error" });
        }
        SessionEvent::Record { record } => {
            eprintln!("record: {} ({:.2} USD/month)", record.short_description, record.estimated_savings)
        }
        SessionEvent::Error { message } => eprintln!("error: {message}"),
        SessionEvent::Done { status } => eprintln!("done: {status:?}"),
    }
}

fn cmd_ask(g: &GlobalArgs, query: &str) -> Outcome {
    if query.trim().is_empty() {
        return Err(fail(EXIT_USAGE, "the query must not be empty"));
    }
    let limits = limits(g)?;
    let gw = load_gateway(&schema_path(g), &fixtures_path(g))?;
    let bank = load_exemplars(g, &gw)?;
    let spec = g.backend.clone().unwrap_or(BackendSpec::Http);
    let llm = spec.build().map_err(|e| fail(EXIT_STARTUP, format!("backend {spec}: {e}")))?;
    let observer = |ev: &SessionEvent| trace(ev);
    let mut deps = SessionDeps::new(&gw, llm.as_ref(), &bank);
    deps.limits = limits;
    deps.observer = Some(&observer);

    let (transcript, error): (SessionTranscript, Option<String>) = match run_session(query, &deps) {
        Ok(t) => (t, None),
        Err(f) => (*f.transcript, Some(f.error.to_string())),
    };
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
    let paths =
        persist_run(&transcript, &out, &timestamp_now()).map_err(|e| fail(EXIT_NO_INPUT, format!("{}: {e}", out.display())))?;
    let summary = json!({
        "status": transcript.status,
        "error": error,
        "records": transcript.recommendations.len(),
        "transcript_path": paths.transcript,
        "records_path": paths.records,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(if transcript.completed() { EXIT_OK } else { EXIT_INCOMPLETE_SESSION })
}

fn config_failure(e: EvalConfigError) -> Failure {
    match e {
        EvalConfigError::Io { .. } => fail(EXIT_NO_INPUT, e),
        _ => fail(EXIT_USAGE, e),
    }
}

fn cmd_eval(g: &GlobalArgs, config_path: &Path, parallelism: Option<usize>) -> Outcome {
    let mut cfg = EvalConfig::load(config_path).map_err(config_failure)?;
    if let Some(n) = g.n_runs {
        cfg.n_runs = n;
    }
    if let Some(p) = parallelism {
        cfg.parallelism = p;
    }
    if let Some(n) = g.max_iterations {
        cfg.max_iterations = n;
    }
    if let Some(b) = &g.backend {
        cfg.backends = vec![b.clone()];
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if let Some(s) = &g.schema {
        cfg.schema = s.clone();
    }
    if let Some(f) = &g.fixtures {
        cfg.fixtures = f.clone();
    }
    cfg.check().map_err(config_failure)?;

    let gw = load_gateway(&cfg.schema, &cfg.fixtures)?;
    let bank = load_exemplars(g, &gw)?;
    let gt = GroundTruth::load(&cfg.ground_truth, &cfg.fixtures).map_err(|e| fail(EXIT_STARTUP, e))?;
    let mut bench = BenchmarkConfig::new(cfg.backends.iter().map(BenchBackend::from_spec).collect());
    bench.n_runs = cfg.n_runs;
    bench.parallelism = cfg.parallelism;
    bench.limits = Limits {
        max_iterations: cfg.max_iterations,
    };
    bench.runs_dir = Some(cfg.out.join("runs"));
    let env = BenchmarkEnv {
        source: &gw,
        bank: &bank,
        ground_truth: &gt,
        clock: None,
    };
    let outcome = run_benchmark(&bench, &env).map_err(|e| fail(EXIT_NO_INPUT, e))?;
    let paths = write_report(&outcome.table, &cfg.out).map_err(|e| fail(EXIT_NO_INPUT, e))?;
    for b in outcome.backends.iter().filter(|b| b.aborted) {
        let last = b.runs.last().and_then(|r| r.error.clone()).unwrap_or_default();
        eprintln!("{}: column incomplete after {} runs: {last}", b.backend, b.runs.len());
    }
    eprintln!("{}", crate::eval::render_markdown(&outcome.table));
    println!("{}", crate::eval::render_csv(&outcome.table).trim_end());
    eprintln!("wrote {} and {}", paths.markdown.display(), paths.csv.display());
    Ok(if outcome.table.any_incomplete() { EXIT_PARTIAL_EVAL } else { EXIT_OK })
}

fn cmd_seed(dir: &Path, force: bool) -> Outcome {
    if !force {
        if let Some((rel, _)) = assets::ALL.iter().find(|(rel, _)| dir.join(rel).exists()) {
            return Err(fail(
                EXIT_USAGE,
                format!("{} already exists; pass --force to overwrite", dir.join(rel).display()),
            ));
        }
    }
    for (rel, text) in assets::ALL {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| fail(EXIT_NO_INPUT, format!("{}: {e}", parent.display())))?;
        }
        std::fs::write(&path, text).map_err(|e| fail(EXIT_NO_INPUT, format!("{}: {e}", path.display())))?;
        println!("{}", path.display());
    }
    Ok(EXIT_OK)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

fn cmd_serve(g: &GlobalArgs, addr: &str) -> Outcome {
    let limits = limits(g)?;
    let gw = load_gateway(&schema_path(g), &fixtures_path(g))?;
    let bank = load_exemplars(g, &gw)?;
    let main = preflight(&g.backend.clone().unwrap_or(BackendSpec::Http))?;
    let followup = match &g.followup_backend {
        Some(spec) => preflight(spec)?,
        None => main.clone(),
    };
    let gateway = Arc::new(gw.clone());
    let mut hub = SessionHub::new(gateway, bank, main).with_followup_backend(followup);
    hub.limits = limits;
    hub.runs_dir = g.out.clone();
    let app = server::router(server::GatewayState::ready(gw)).merge(api::router(Arc::new(hub)));

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| fail(EXIT_STARTUP, e))?;
    rt.block_on(server::serve_router(addr, app, shutdown_signal(), |a| {
        eprintln!("listening on http://{a}");
    }))
    .map_err(|e| fail(EXIT_STARTUP, e))?;
    Ok(EXIT_OK)
}
