use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::filter::{filter_schema, token_set};
use crate::schema::{parse_query, validate_query, UnifiedSchema};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exemplar {
    pub nl_text: String,
    pub query_text: String,
    pub endpoints_used: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BankError {
    #[error("exemplar bank is not a JSON list of {{nl, query}}: {0}")]
    Format(String),
    #[error("exemplar {index} ({nl:?}) does not validate: {message}")]
    InvalidExemplar { index: usize, nl: String, message: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExemplar {
    nl: String,
    query: String,
}

/// Parses the bank and checks every query against the schema.
pub fn load_bank(json: &str, schema: &UnifiedSchema) -> Result<Vec<Exemplar>, BankError> {
    let raw: Vec<RawExemplar> = serde_json::from_str(json).map_err(|e| BankError::Format(e.to_string()))?;
    raw.into_iter()
        .enumerate()
        .map(|(index, r)| {
            let invalid = |message: String| BankError::InvalidExemplar {
                index,
                nl: r.nl.clone(),
                message,
            };
            let doc = parse_query(&r.query).map_err(|e| invalid(e.to_string()))?;
            let report = validate_query(&doc, schema);
            if !report.valid {
                return Err(invalid(report.feedback()));
            }
            let endpoints_used = doc
                .selections
                .iter()
                .filter_map(|s| schema.resolve_endpoint(&s.name).map(|(ep, _)| ep.name.clone()))
                .collect();
            Ok(Exemplar {
                nl_text: r.nl.clone(),
                query_text: r.query.clone(),
                endpoints_used,
            })
        })
        .collect()
}

/// The bank compiled into the crate.
pub fn shipped_bank(schema: &UnifiedSchema) -> Vec<Exemplar> {
    load_bank(crate::assets::EXEMPLAR_BANK_JSON, schema).expect("shipped bank validates")
}

/// |a ∩ b| / |a ∪ b|, zero when both are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

/// 0.5 * lexical Jaccard + 0.5 * endpoint-set Jaccard.
pub fn exemplar_score(request_tokens: &BTreeSet<String>, subset: &BTreeSet<String>, ex: &Exemplar) -> f64 {
    0.5 * jaccard(request_tokens, &token_set(&ex.nl_text)) + 0.5 * jaccard(&ex.endpoints_used, subset)
}

/// Whole bank with scores, best first; ties keep bank order.
pub fn rank_exemplars<'a>(
    nl_request: &str,
    bank: &'a [Exemplar],
    subset: &BTreeSet<String>,
) -> Vec<(&'a Exemplar, f64)> {
    let tokens = token_set(nl_request);
    let mut scored: Vec<(&Exemplar, f64)> = bank.iter().map(|e| (e, exemplar_score(&tokens, subset, e))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored
}

/// Top-`k` exemplars for the request, with the endpoint side of the score
/// taken from [`filter_schema`].
pub fn select_exemplars(nl_request: &str, bank: &[Exemplar], k: usize, schema: &UnifiedSchema) -> Vec<Exemplar> {
    let subset = filter_schema(nl_request, schema).endpoint_set();
    rank_exemplars(nl_request, bank, &subset)
        .into_iter()
        .take(k)
        .map(|(e, _)| e.clone())
        .collect()
}
