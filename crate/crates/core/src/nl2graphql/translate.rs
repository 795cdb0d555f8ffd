use serde::Serialize;
use thiserror::Error;

use super::exemplars::{select_exemplars, Exemplar};
use super::filter::{filter_schema, filter_schema_with_llm};
use super::prompt::{build_prompt, PromptError};
use crate::llm::{ChatMessage, CompletionParams, LlmBackend, LlmError};
use crate::schema::{parse_query, validate_query, QueryDocument, UnifiedSchema, ValidationReport};

pub const DEFAULT_MAX_ATTEMPTS: usize = 3;
pub const DEFAULT_EXEMPLARS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TranslateOptions {
    pub max_attempts: usize,
    pub exemplars: usize,
    /// Ask the model to pick endpoints instead of the keyword heuristic.
    pub llm_filter: bool,
    pub params: CompletionParams,
}

impl Default for TranslateOptions {
    fn default() -> Self {
        Self {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            exemplars: DEFAULT_EXEMPLARS,
            llm_filter: false,
            params: CompletionParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub query_text: String,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranslationResult {
    pub final_query: QueryDocument,
    pub attempts: Vec<Attempt>,
    pub attempts_used: usize,
}

impl TranslationResult {
    pub fn final_text(&self) -> &str {
        &self.attempts.last().expect("at least one attempt").query_text
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TranslateError {
    #[error("TranslationExhausted: no valid query after {} attempts", attempts.len())]
    TranslationExhausted { attempts: Vec<Attempt> },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("max_attempts must be at least 1")]
    ZeroAttempts,
}

/// First fenced code block of the completion, or the whole text.
pub fn extract_query(completion: &str) -> String {
    if let Some(start) = completion.find("```") {
        let rest = &completion[start + 3..];
        // skip an info string such as `graphql`
        let body = match rest.find('\n') {
            Some(nl) if !rest[..nl].contains('{') => &rest[nl + 1..],
            _ => rest,
        };
        if let Some(end) = body.find("```") {
            return body[..end].trim().to_string();
        }
    }
    completion.trim().to_string()
}

fn check(text: &str, schema: &UnifiedSchema) -> (Option<QueryDocument>, ValidationReport) {
    match parse_query(text) {
        Ok(doc) => {
            let report = validate_query(&doc, schema);
            (Some(doc), report)
        }
        Err(e) => (None, ValidationReport::from_parse_error(&e)),
    }
}

/// Text of the correction turn; carries the report's errors verbatim.
pub fn feedback_message(report: &ValidationReport) -> String {
    format!(
        "Observation: the query failed validation against the unified schema.\n{}\nRegenerate the complete query, fixing every error listed.",
        report.feedback()
    )
}

/// Generate, parse, validate; on failure feed the errors back and retry.
pub fn translate(
    nl_request: &str,
    schema: &UnifiedSchema,
    bank: &[Exemplar],
    llm: &dyn LlmBackend,
    options: &TranslateOptions,
) -> Result<TranslationResult, TranslateError> {
    if options.max_attempts == 0 {
        return Err(TranslateError::ZeroAttempts);
    }
    let subset = if options.llm_filter {
        filter_schema_with_llm(nl_request, schema, llm, &options.params)?
    } else {
        filter_schema(nl_request, schema)
    };
    let exemplars = select_exemplars(nl_request, bank, options.exemplars, schema);
    let bundle = build_prompt(nl_request, &subset, &exemplars)?;
    let mut messages = bundle.to_messages();
    let mut attempts = Vec::new();
    for _ in 0..options.max_attempts {
        let completion = llm.complete(&messages, &options.params)?;
        let text = extract_query(&completion);
        let (doc, report) = check(&text, schema);
        let valid = report.valid;
        let feedback = feedback_message(&report);
        attempts.push(Attempt {
            query_text: text,
            report,
        });
        if valid {
            let attempts_used = attempts.len();
            return Ok(TranslationResult {
                final_query: doc.expect("valid report implies a parsed document"),
                attempts,
                attempts_used,
            });
        }
        messages.push(ChatMessage::assistant(completion));
        messages.push(ChatMessage::user(feedback));
    }
    Err(TranslateError::TranslationExhausted { attempts })
}
