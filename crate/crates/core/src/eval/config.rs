use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::benchmark::DEFAULT_N_RUNS;
use crate::agent::DEFAULT_MAX_ITERATIONS;
use crate::llm::BackendSpec;

#[derive(Debug, Error)]
pub enum EvalConfigError {
    #[error("IoError: {path}: {message}")]
    Io { path: String, message: String },
    #[error("ConfigError: {0}")]
    Parse(String),
    #[error("UsageError: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    backends: Vec<String>,
    #[serde(default = "default_n_runs")]
    n_runs: usize,
    #[serde(default = "default_parallelism")]
    parallelism: usize,
    #[serde(default = "default_out")]
    out: PathBuf,
    #[serde(default = "default_ground_truth")]
    ground_truth: PathBuf,
    #[serde(default = "default_fixtures")]
    fixtures: PathBuf,
    #[serde(default = "default_schema")]
    schema: PathBuf,
    #[serde(default = "default_max_iterations")]
    max_iterations: usize,
}

fn default_n_runs() -> usize {
    DEFAULT_N_RUNS
}
fn default_parallelism() -> usize {
    1
}
fn default_out() -> PathBuf {
    "eval-out".into()
}
fn default_ground_truth() -> PathBuf {
    "groundtruth/use_case_1.json".into()
}
fn default_fixtures() -> PathBuf {
    "fixtures/v1".into()
}
fn default_schema() -> PathBuf {
    "schema/unified.graphql".into()
}
fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

/// `eval.toml`. Relative paths are taken from the directory holding the file.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub backends: Vec<BackendSpec>,
    pub n_runs: usize,
    pub parallelism: usize,
    pub out: PathBuf,
    pub ground_truth: PathBuf,
    pub fixtures: PathBuf,
    pub schema: PathBuf,
    pub max_iterations: usize,
}

impl EvalConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, EvalConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| EvalConfigError::Parse(e.to_string()))?;
        let at = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let backends = raw
            .backends
            .iter()
            .map(|s| match s.parse::<BackendSpec>() {
                Ok(BackendSpec::Scripted(p)) => Ok(BackendSpec::Scripted(at(p))),
                Ok(spec) => Ok(spec),
                Err(e) => Err(EvalConfigError::Invalid(e)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let cfg = Self {
            backends,
            n_runs: raw.n_runs,
            parallelism: raw.parallelism,
            out: at(raw.out),
            ground_truth: at(raw.ground_truth),
            fixtures: at(raw.fixtures),
            schema: at(raw.schema),
            max_iterations: raw.max_iterations,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, EvalConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn check(&self) -> Result<(), EvalConfigError> {
        if self.backends.is_empty() {
            return Err(EvalConfigError::Invalid("at least one backend is required".into()));
        }
        if self.n_runs == 0 {
            return Err(EvalConfigError::Invalid("n_runs must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(EvalConfigError::Invalid("parallelism must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(EvalConfigError::Invalid("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}
