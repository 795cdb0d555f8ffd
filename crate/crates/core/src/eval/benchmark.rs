use std::io;
use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::ground_truth::GroundTruth;
use super::metrics::{MetricsRow, MetricsTable, RunScore};
use crate::agent::api::BackendFactory;
use crate::agent::{persist_run, run_session, AgentError, Clock, Limits, SessionDeps, SessionStatus, SessionTranscript};
use crate::assets::USE_CASE_QUERY;
use crate::gateway::DataSource;
use crate::llm::{BackendSpec, LlmError};
use crate::nl2graphql::Exemplar;

pub const DEFAULT_N_RUNS: usize = 10;
/// Consecutive `LlmUnavailable` runs after which a backend's column stops.
pub const ABORT_AFTER_UNAVAILABLE: usize = 3;

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("UsageError: n_runs must be at least 1")]
    NoRuns,
    #[error("UsageError: no backends configured")]
    NoBackends,
    #[error("IoError: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone)]
pub struct BenchBackend {
    pub label: String,
    pub factory: BackendFactory,
}

impl BenchBackend {
    pub fn new(label: impl Into<String>, factory: BackendFactory) -> Self {
        Self {
            label: label.into(),
            factory,
        }
    }

    pub fn from_spec(spec: &BackendSpec) -> Self {
        let spec = spec.clone();
        Self::new(spec.label(), Arc::new(move || spec.build()))
    }
}

impl std::fmt::Debug for BenchBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchBackend").field("label", &self.label).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub backends: Vec<BenchBackend>,
    pub n_runs: usize,
    pub parallelism: usize,
    pub query: String,
    pub limits: Limits,
    /// Per-run transcripts land in `<runs_dir>/<backend>/`.
    pub runs_dir: Option<PathBuf>,
}

impl BenchmarkConfig {
    pub fn new(backends: Vec<BenchBackend>) -> Self {
        Self {
            backends,
            n_runs: DEFAULT_N_RUNS,
            parallelism: 1,
            query: USE_CASE_QUERY.to_string(),
            limits: Limits::default(),
            runs_dir: None,
        }
    }
}

/// What every run shares. Nothing in here is mutated by a session.
#[derive(Clone, Copy)]
pub struct BenchmarkEnv<'a> {
    pub source: &'a dyn DataSource,
    pub bank: &'a [Exemplar],
    pub ground_truth: &'a GroundTruth,
    /// Defaults to wall-clock time.
    pub clock: Option<&'a dyn Clock>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub index: usize,
    /// `None` when the backend could not be constructed.
    pub status: Option<SessionStatus>,
    pub error: Option<String>,
    pub score: RunScore,
    pub transcript_path: Option<PathBuf>,
    pub records_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackendRuns {
    pub backend: String,
    pub runs: Vec<RunRecord>,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkOutcome {
    pub table: MetricsTable,
    pub backends: Vec<BackendRuns>,
}

struct RunOutput {
    transcript: Option<SessionTranscript>,
    error: Option<String>,
    unavailable: bool,
}

fn run_one(backend: &BenchBackend, config: &BenchmarkConfig, env: &BenchmarkEnv<'_>) -> RunOutput {
    let llm = match (backend.factory)() {
        Ok(b) => b,
        Err(e) => {
            return RunOutput {
                transcript: None,
                error: Some(e.to_string()),
                unavailable: true,
            }
        }
    };
    let mut deps = SessionDeps::new(env.source, llm.as_ref(), env.bank);
    deps.limits = config.limits;
    deps.clock = env.clock;
    match run_session(&config.query, &deps) {
        Ok(t) => RunOutput {
            transcript: Some(t),
            error: None,
            unavailable: false,
        },
        Err(f) => RunOutput {
            unavailable: matches!(f.error, AgentError::Llm(LlmError::Unavailable(_))),
            error: Some(f.error.to_string()),
            transcript: Some(*f.transcript),
        },
    }
}

fn unique_labels(backends: &[BenchBackend]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for b in backends {
        let mut label = b.label.clone();
        let mut k = 2;
        while out.contains(&label) {
            label = format!("{}-{k}", b.label);
            k += 1;
        }
        out.push(label);
    }
    out
}

/// Runs `n_runs` fresh sessions per backend, up to `parallelism` at once,
/// and folds the scored transcripts into one row per backend.
pub fn run_benchmark(config: &BenchmarkConfig, env: &BenchmarkEnv<'_>) -> Result<BenchmarkOutcome, BenchmarkError> {
    if config.n_runs == 0 {
        return Err(BenchmarkError::NoRuns);
    }
    if config.backends.is_empty() {
        return Err(BenchmarkError::NoBackends);
    }
    let width = config.parallelism.max(1);
    let mut table = MetricsTable::default();
    let mut all = Vec::new();

    for (backend, label) in config.backends.iter().zip(unique_labels(&config.backends)) {
        let mut runs: Vec<RunRecord> = Vec::new();
        let mut streak = 0;
        let mut aborted = false;
        let mut next = 0;
        while next < config.n_runs && !aborted {
            let wave = next..(next + width).min(config.n_runs);
            next = wave.end;
            let outputs: Vec<(usize, RunOutput)> = std::thread::scope(|s| {
                let handles: Vec<_> = wave
                    .map(|i| (i, s.spawn(move || run_one(backend, config, env))))
                    .collect();
                handles
                    .into_iter()
                    .map(|(i, h)| (i, h.join().expect("benchmark run panicked")))
                    .collect()
            });
            for (i, out) in outputs {
                streak = if out.unavailable { streak + 1 } else { 0 };
                let mut rec = RunRecord {
                    index: i + 1,
                    status: out.transcript.as_ref().map(|t| t.status),
                    error: out.error,
                    score: out
                        .transcript
                        .as_ref()
                        .map(|t| RunScore::of(t, env.ground_truth))
                        .unwrap_or_else(RunScore::failed),
                    transcript_path: None,
                    records_path: None,
                };
                if let (Some(dir), Some(t)) = (&config.runs_dir, &out.transcript) {
                    let p = persist_run(t, &dir.join(&label), &format!("run-{:02}", i + 1))?;
                    rec.transcript_path = Some(p.transcript);
                    rec.records_path = Some(p.records);
                }
                runs.push(rec);
                if streak >= ABORT_AFTER_UNAVAILABLE {
                    aborted = true;
                    break;
                }
            }
        }
        let scores: Vec<RunScore> = runs.iter().map(|r| r.score.clone()).collect();
        table.rows.push(MetricsRow::aggregate(&label, &scores, aborted));
        all.push(BackendRuns {
            backend: label,
            runs,
            aborted,
        });
    }
    Ok(BenchmarkOutcome { table, backends: all })
}
