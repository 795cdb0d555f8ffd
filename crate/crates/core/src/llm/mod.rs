//! Chat-completion backends. Everything above this module talks to
//! [`LlmBackend::complete`] only.

mod http;
mod scripted;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig};
pub use scripted::{load_script, parse_script, Script, ScriptEntry, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_id: String,
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 2048,
            model_id: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("LlmUnavailable: {0}")]
    Unavailable(String),
    #[error("AuthError: {0}")]
    Auth(String),
    #[error("ScriptMismatch at entry {index}: expected the last user message to contain {expected:?}")]
    ScriptMismatch { index: usize, expected: String },
    #[error("ScriptExhausted: all {0} entries consumed")]
    ScriptExhausted(usize),
    #[error("ConcurrentUse: scripted backend `{0}` was called while another call was in flight")]
    ConcurrentUse(String),
    #[error("SchemaViolation: {0}")]
    SchemaViolation(String),
    #[error("InvalidRequest: {0}")]
    InvalidRequest(String),
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<String, LlmError>;

    /// Label used in reports and transcript file names.
    fn name(&self) -> &str;
}

/// Shared precondition check for every backend.
pub(crate) fn check_messages(messages: &[ChatMessage]) -> Result<(), LlmError> {
    if messages.is_empty() {
        return Err(LlmError::InvalidRequest("no messages".into()));
    }
    for (i, m) in messages.iter().enumerate() {
        if matches!(m.role, Role::System | Role::User) && m.content.trim().is_empty() {
            return Err(LlmError::InvalidRequest(format!("message {i} has empty content")));
        }
    }
    Ok(())
}

/// Backend selector as written on the command line or in `eval.toml`:
/// `scripted:<path>` or `http`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Scripted(PathBuf),
    Http,
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(path) = s.strip_prefix("scripted:") {
            if path.is_empty() {
                return Err("scripted backend needs a path: scripted:<file>".into());
            }
            Ok(BackendSpec::Scripted(PathBuf::from(path)))
        } else if s == "http" {
            Ok(BackendSpec::Http)
        } else {
            Err(format!("unknown backend `{s}`; expected scripted:<path> or http"))
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Scripted(p) => write!(f, "scripted:{}", p.display()),
            BackendSpec::Http => f.write_str("http"),
        }
    }
}

impl BackendSpec {
    /// Builds a fresh backend. Scripted backends are named after their file
    /// stem, HTTP backends after the model id.
    pub fn build(&self) -> Result<Box<dyn LlmBackend>, LlmError> {
        match self {
            BackendSpec::Scripted(path) => {
                let script = load_script(path)?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "scripted".into());
                Ok(Box::new(ScriptedBackend::new(name, script)))
            }
            BackendSpec::Http => Ok(Box::new(HttpBackend::new(HttpConfig::from_env()?))),
        }
    }

    /// Label without constructing the backend.
    pub fn label(&self) -> String {
        match self {
            BackendSpec::Scripted(path) => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scripted".into()),
            BackendSpec::Http => std::env::var("LLM_MODEL_ID").unwrap_or_else(|_| http::DEFAULT_MODEL.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temperature_defaults_to_zero() {
        assert_eq!(CompletionParams::default().temperature, 0.0);
    }

    #[test]
    fn backend_spec_parsing() {
        assert_eq!(
            "scripted:scripts/perfect.json".parse::<BackendSpec>().unwrap(),
            BackendSpec::Scripted("scripts/perfect.json".into())
        );
        assert_eq!("http".parse::<BackendSpec>().unwrap(), BackendSpec::Http);
        assert!("scripted:".parse::<BackendSpec>().is_err());
        assert!("gpt".parse::<BackendSpec>().is_err());
        let spec: BackendSpec = "scripted:scripts/lazy.json".parse().unwrap();
        assert_eq!(spec.label(), "lazy");
        assert_eq!(spec.to_string(), "scripted:scripts/lazy.json");
    }

    #[test]
    fn message_preconditions() {
        assert!(check_messages(&[]).is_err());
        assert!(check_messages(&[ChatMessage::user("  ")]).is_err());
        assert!(check_messages(&[ChatMessage::user("hi"), ChatMessage::assistant("")]).is_ok());
    }
}
