use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::schema::UnifiedSchema;

/// Pseudo-tool that routes a natural-language request through translation.
pub const NL2GRAPHQL_ACTION: &str = "nl2graphql";
/// Pseudo-tool that sends Action Input verbatim as GraphQL.
pub const GRAPHQL_ACTION: &str = "graphql";
pub const FINISH_ACTION: &str = "Finish";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentAction {
    ToolCall { name: String, args: Value },
    Finish { answer: String },
    Unparsed { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedStep {
    pub thought: String,
    pub action: AgentAction,
}

static ACTION_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^\s*action\s*:\s*(.*?)\s*$").unwrap());
static INPUT_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*action\s+input\s*:\s*(.*?)\s*$").unwrap());
static THOUGHT_PREFIX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^\s*thought\s*:\s*").unwrap());
static STOP_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*(observation|thought|action)\s*:").unwrap());
static FINAL_ANSWER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*final\s+answer\s*:\s*(.*?)\s*$").unwrap());

fn strip_fence(s: &str) -> &str {
    let t = s.trim();
    match t.strip_prefix("```") {
        Some(rest) => {
            let rest = rest.split_once('\n').map(|(_, body)| body).unwrap_or(rest);
            rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
        }
        None => t,
    }
}

/// Splits one completion into thought and action. Only the first `Action:`
/// line counts; `Action Input:` may continue over several lines.
pub fn parse_react(text: &str) -> ParsedStep {
    let lines: Vec<&str> = text.lines().collect();
    let action_at = lines
        .iter()
        .position(|l| ACTION_LINE.is_match(l) && !INPUT_LINE.is_match(l));
    let thought_end = action_at.unwrap_or(lines.len());
    let mut thought_lines: Vec<&str> = Vec::new();
    let mut final_answer = None;
    for l in &lines[..thought_end] {
        if let Some(c) = FINAL_ANSWER.captures(l) {
            final_answer = Some(c[1].to_string());
            break;
        }
        thought_lines.push(l);
    }
    let thought = THOUGHT_PREFIX
        .replace(thought_lines.join("\n").trim(), "")
        .trim()
        .to_string();

    let Some(at) = action_at.filter(|_| final_answer.is_none()) else {
        let action = match final_answer {
            Some(answer) => AgentAction::Finish { answer },
            None => AgentAction::Unparsed {
                reason: "no `Action:` line found".into(),
            },
        };
        return ParsedStep { thought, action };
    };
    let name = ACTION_LINE.captures(lines[at]).unwrap()[1]
        .trim_matches(|c| c == '`' || c == '"')
        .to_string();

    let mut input = String::new();
    if let Some(i) = lines[at + 1..].iter().position(|l| INPUT_LINE.is_match(l)) {
        let i = at + 1 + i;
        input.push_str(&INPUT_LINE.captures(lines[i]).unwrap()[1]);
        for l in &lines[i + 1..] {
            if STOP_LINE.is_match(l) {
                break;
            }
            input.push('\n');
            input.push_str(l);
        }
    }
    let input = strip_fence(&input).to_string();

    let action = if name.eq_ignore_ascii_case(FINISH_ACTION) {
        AgentAction::Finish { answer: input }
    } else if name.is_empty() {
        AgentAction::Unparsed {
            reason: "empty action name".into(),
        }
    } else if name == GRAPHQL_ACTION || name == NL2GRAPHQL_ACTION {
        // free text is fine here; a JSON string or {"query"|"request": ..} is unwrapped
        let args = match serde_json::from_str::<Value>(&input) {
            Ok(Value::String(s)) => Value::String(s),
            Ok(Value::Object(m)) => m
                .get("query")
                .or_else(|| m.get("request"))
                .cloned()
                .unwrap_or(Value::Object(m)),
            _ => Value::String(input),
        };
        AgentAction::ToolCall { name, args }
    } else if input.is_empty() {
        AgentAction::ToolCall {
            name,
            args: Value::Object(Default::default()),
        }
    } else {
        match serde_json::from_str::<Value>(&input) {
            Ok(args) => AgentAction::ToolCall { name, args },
            Err(e) => AgentAction::Unparsed {
                reason: format!("Action Input for {name} is not valid JSON: {e}"),
            },
        }
    };
    ParsedStep { thought, action }
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Byte offsets of whole-word occurrences of `word` in `text`.
pub(crate) fn word_positions<'a>(text: &'a str, word: &'a str) -> impl Iterator<Item = usize> + 'a {
    text.match_indices(word).map(|(i, _)| i).filter(move |&i| {
        let before = text[..i].chars().next_back();
        let after = text[i + word.len()..].chars().next();
        !before.is_some_and(is_ident) && !after.is_some_and(is_ident)
    })
}

pub(crate) fn mentions(text: &str, word: &str) -> bool {
    word_positions(text, word).next().is_some()
}

/// Canonical tool names mentioned in `text`, directly or through an alias.
pub fn tools_referenced(text: &str, schema: &UnifiedSchema) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = schema
        .endpoint_names()
        .filter(|n| mentions(text, n))
        .map(String::from)
        .collect();
    for (alias, canonical) in &schema.alias_table {
        if mentions(text, alias) {
            out.insert(canonical.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use serde_json::json;

    #[test]
    fn tool_call_with_json_input() {
        let s = parse_react(
            "Thought: list the apps first\nAction: get_applications_names\nAction Input: {}\n",
        );
        assert_eq!(s.thought, "list the apps first");
        assert_eq!(
            s.action,
            AgentAction::ToolCall {
                name: "get_applications_names".into(),
                args: json!({})
            }
        );
    }

    #[test]
    fn whitespace_and_multiline_input_are_tolerated() {
        let s = parse_react(
            "Thought: x\n   action :  get_entities  \n  ACTION INPUT:  {\n  \"application_name\": \"PaymentsCore\"\n}\nObservation: ignored",
        );
        assert_eq!(
            s.action,
            AgentAction::ToolCall {
                name: "get_entities".into(),
                args: json!({"application_name": "PaymentsCore"})
            }
        );
    }

    #[test]
    fn finish_and_final_answer() {
        let s = parse_react("Thought: done\nAction: Finish\nAction Input: all data collected");
        assert_eq!(
            s.action,
            AgentAction::Finish {
                answer: "all data collected".into()
            }
        );
        let s = parse_react("I know enough.\nFinal Answer: ok");
        assert_eq!(s.action, AgentAction::Finish { answer: "ok".into() });
    }

    #[test]
    fn missing_action_or_bad_json_is_unparsed() {
        assert!(matches!(
            parse_react("I should think about this more.").action,
            AgentAction::Unparsed { .. }
        ));
        assert!(matches!(
            parse_react("Action: get_entities\nAction Input: {application_name: x}").action,
            AgentAction::Unparsed { .. }
        ));
    }

    #[test]
    fn translation_actions_take_free_text() {
        let s = parse_react("Action: nl2graphql\nAction Input: anomalies for OnlineBoutique");
        assert_eq!(
            s.action,
            AgentAction::ToolCall {
                name: "nl2graphql".into(),
                args: json!("anomalies for OnlineBoutique")
            }
        );
        let s = parse_react("Action: graphql\nAction Input: ```graphql\n{ get_applications_names }\n```");
        assert_eq!(
            s.action,
            AgentAction::ToolCall {
                name: "graphql".into(),
                args: json!("{ get_applications_names }")
            }
        );
    }

    #[test]
    fn references_are_whole_words() {
        let schema = assets::unified_schema();
        let refs = tools_referenced(
            "use get_entities, then get_actions; not get_entities_v2. apptioGetSpendingAnomalyEvents too",
            &schema,
        );
        let expected: BTreeSet<String> = ["get_entities", "get_actions", "get_spending_anomaly_events"]
            .into_iter()
            .map(String::from)
            .collect();
        assert_eq!(refs, expected);
    }
}
