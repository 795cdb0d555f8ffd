use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::react::word_positions;
use super::tools::ToolRegistry;
use super::AgentError;
use crate::llm::{ChatMessage, CompletionParams, LlmBackend};

pub const PLANNING_RULES: &str = "You are the Planning Agent of a FinOps assistant.\n\
Break the request into a numbered list of steps, one per line, formatted `N. description`.\n\
Name the exact tool a step uses. Steps that only analyse earlier results name no tool.\n\
Write `(depends on N)` or `(depends on N, M)` when a step needs earlier results; \
otherwise a step depends on the one before it.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub index: usize,
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bound_tool: Option<String>,
    pub depends_on: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionPlan {
    pub steps: Vec<PlanStep>,
}

impl ExecutionPlan {
    /// Tools in step order, repeats kept.
    pub fn bound_tools(&self) -> Vec<&str> {
        self.steps.iter().filter_map(|s| s.bound_tool.as_deref()).collect()
    }

    pub fn render(&self) -> String {
        self.steps
            .iter()
            .map(|s| format!("{}. {}", s.index, s.description))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

static STEP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*(?:[-*]\s*)?(?:\*\*)?(?:step\s*)?(\d+)\s*[.):]\s*(?:\*\*)?\s*(.+?)\s*$").unwrap());
static DEPENDS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)depends\s+on\s+(?:steps?\s+)?(\d+(?:\s*(?:,|and)\s*\d+)*)").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").unwrap());

/// The earliest whole-word tool name in `text`.
fn first_tool(text: &str, registry: &ToolRegistry) -> Option<String> {
    registry
        .names()
        .into_iter()
        .filter_map(|n| word_positions(text, n).next().map(|i| (i, n)))
        .min()
        .map(|(_, n)| n.to_string())
}

/// Parses a numbered-step response. Steps are renumbered 1.. in the order
/// they appear; dependency numbers refer to the original numbering.
pub fn parse_plan(text: &str, registry: &ToolRegistry) -> Result<ExecutionPlan, AgentError> {
    let raw: Vec<(usize, String)> = text
        .lines()
        .filter_map(|l| STEP.captures(l))
        .map(|c| (c[1].parse().unwrap_or(0), c[2].to_string()))
        .collect();
    if raw.is_empty() {
        return Err(AgentError::UnparseablePlan("no numbered steps found".into()));
    }
    let mut steps: Vec<PlanStep> = Vec::with_capacity(raw.len());
    for (pos, (_, description)) in raw.iter().enumerate() {
        let index = pos + 1;
        let mut depends_on: Vec<usize> = match DEPENDS.captures(description) {
            Some(c) => NUMBER
                .find_iter(&c[1])
                .filter_map(|m| m.as_str().parse::<usize>().ok())
                .filter_map(|n| raw[..pos].iter().position(|(orig, _)| *orig == n))
                .map(|p| p + 1)
                .collect(),
            None if index > 1 => vec![index - 1],
            None => Vec::new(),
        };
        depends_on.sort_unstable();
        depends_on.dedup();
        steps.push(PlanStep {
            index,
            description: description.clone(),
            bound_tool: first_tool(description, registry),
            depends_on,
        });
    }
    if steps.iter().all(|s| s.bound_tool.is_none()) {
        return Err(AgentError::UnparseablePlan("no step names a tool".into()));
    }
    Ok(ExecutionPlan { steps })
}

pub fn planning_messages(user_query: &str, registry: &ToolRegistry, context: Option<&str>) -> Vec<ChatMessage> {
    let mut system = format!("{PLANNING_RULES}\n\nAvailable tools:\n{}", registry.digest());
    if let Some(ctx) = context {
        system.push_str("\nContext from the previous session:\n");
        system.push_str(ctx);
        system.push('\n');
    }
    vec![
        ChatMessage::system(system),
        ChatMessage::user(format!("Plan request: {user_query}")),
    ]
}

/// Asks the model for a plan and parses it. Returns the raw completion too.
pub fn plan(
    user_query: &str,
    registry: &ToolRegistry,
    llm: &dyn LlmBackend,
    params: &CompletionParams,
    context: Option<&str>,
) -> Result<(ExecutionPlan, String), AgentError> {
    let messages = planning_messages(user_query, registry, context);
    let raw = llm.complete(&messages, params)?;
    let parsed = parse_plan(&raw, registry)?;
    Ok((parsed, raw))
}
