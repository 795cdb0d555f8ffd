use serde::Serialize;
use thiserror::Error;

use super::exemplars::Exemplar;
use super::filter::SchemaSubset;
use crate::llm::ChatMessage;

/// Upper bound on the summed size of every prompt section, in bytes.
pub const PROMPT_BYTE_LIMIT: usize = 16 * 1024;

pub const TASK_RULES: &str = "You translate FinOps questions into one GraphQL query over the unified schema below.
Rules:
- Emit a single `query` operation inside a ```graphql fenced block.
- Use only the listed endpoints, arguments and fields.
- Pass arguments as literals; no variables, fragments or directives.
- Select only the fields the question needs.";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PromptError {
    #[error("PromptOverflow: {needed} bytes needed, limit is {limit}")]
    PromptOverflow { needed: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptBundle {
    pub system: String,
    /// (request, query) pairs, best exemplar first.
    pub few_shot: Vec<(String, String)>,
    pub user: String,
}

fn shot_len(nl: &str, query: &str) -> usize {
    nl.len() + query.len() + "```graphql\n\n```".len()
}

impl PromptBundle {
    pub fn byte_len(&self) -> usize {
        self.system.len()
            + self.user.len()
            + self.few_shot.iter().map(|(n, q)| shot_len(n, q)).sum::<usize>()
    }

    /// System prompt, then each exemplar as a user/assistant exchange, then
    /// the request.
    pub fn to_messages(&self) -> Vec<ChatMessage> {
        let mut out = vec![ChatMessage::system(self.system.clone())];
        for (nl, q) in &self.few_shot {
            out.push(ChatMessage::user(nl.clone()));
            out.push(ChatMessage::assistant(format!("```graphql\n{q}\n```")));
        }
        out.push(ChatMessage::user(self.user.clone()));
        out
    }

    /// Plain-text rendering, byte-stable for identical inputs.
    pub fn render(&self) -> String {
        let mut s = format!("## system\n{}\n\n## examples\n", self.system);
        for (nl, q) in &self.few_shot {
            s.push_str(&format!("Q: {nl}\nA: {q}\n"));
        }
        s.push_str(&format!("\n## request\n{}\n", self.user));
        s
    }
}

pub fn build_prompt(nl_request: &str, subset: &SchemaSubset, exemplars: &[Exemplar]) -> Result<PromptBundle, PromptError> {
    let system = format!("{TASK_RULES}\n\nSchema endpoints:\n{}", subset.digest);
    let user = format!("Request: {nl_request}");
    let mut bundle = PromptBundle {
        system,
        few_shot: Vec::new(),
        user,
    };
    let base = bundle.byte_len();
    let overflow = |needed| PromptError::PromptOverflow {
        needed,
        limit: PROMPT_BYTE_LIMIT,
    };
    if base > PROMPT_BYTE_LIMIT {
        return Err(overflow(base));
    }
    let mut used = base;
    for ex in exemplars {
        let n = shot_len(&ex.nl_text, &ex.query_text);
        if used + n > PROMPT_BYTE_LIMIT {
            break;
        }
        used += n;
        bundle.few_shot.push((ex.nl_text.clone(), ex.query_text.clone()));
    }
    if !exemplars.is_empty() && bundle.few_shot.is_empty() {
        return Err(overflow(base + shot_len(&exemplars[0].nl_text, &exemplars[0].query_text)));
    }
    Ok(bundle)
}
