//! Planning, data retrieval and analysis agents over the six retrieval
//! tools, plus the session API that streams runs to a browser.

pub mod api;
mod consolidate;
mod planner;
mod react;
mod recommend;
mod records;
mod session;
mod tools;

use thiserror::Error;

use crate::llm::LlmError;

pub use consolidate::{consolidate, fingerprint_line, AppView, ConsolidatedDataset, DatasetRecord, ToolObservation};
pub use planner::{parse_plan, plan, planning_messages, ExecutionPlan, PlanStep, PLANNING_RULES};
pub use react::{parse_react, tools_referenced, AgentAction, ParsedStep, FINISH_ACTION, GRAPHQL_ACTION, NL2GRAPHQL_ACTION};
pub use recommend::{
    analysis_messages, apply_overlap_rule, parse_records, recommend, validate_record, Category, Constraints, Priority,
    RecommendOutcome, RecommendationRecord, ANALYSIS_RULES,
};
pub use records::{emit_records, parse_jsonl, persist_run, records_to_jsonl, timestamp_now, PersistedRun};
pub use session::{
    run_session, Clock, Dispatch, FrozenClock, HaltReason, Invocation, Limits, ParentContext, ReactIteration,
    SessionDeps, SessionEvent, SessionFailure, SessionObserver, SessionStatus, SessionTranscript, Stage, SystemClock,
    DEFAULT_MAX_ITERATIONS, RETRIEVAL_RULES,
};
pub use tools::{invoke_tool, synthesize_query, Observation, ToolCategory, ToolRegistry, ToolSpec};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("IncompleteRegistry: schema has no endpoint `{0}`")]
    IncompleteRegistry(String),
    #[error("UnparseablePlan: {0}")]
    UnparseablePlan(String),
    #[error("IterationCapExceeded: no halt within {0} iterations")]
    IterationCapExceeded(usize),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("NoRecommendations: no valid record survived ({} dropped)", dropped.len())]
    NoRecommendations { dropped: Vec<String> },
}
