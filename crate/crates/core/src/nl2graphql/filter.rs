use std::collections::BTreeSet;

use serde::Serialize;

use crate::llm::{ChatMessage, CompletionParams, LlmBackend, LlmError};
use crate::schema::{introspect, UnifiedSchema};

const STOPWORDS: &[&str] = &[
    "a", "about", "all", "an", "and", "any", "are", "as", "at", "be", "by", "can", "do", "does",
    "for", "from", "get", "give", "have", "how", "i", "in", "is", "it", "its", "me", "my", "of",
    "on", "or", "our", "please", "show", "should", "so", "that", "the", "their", "them", "there",
    "these", "this", "to", "us", "we", "what", "which", "with", "you",
];

fn stem(word: &str) -> String {
    if word.len() > 4 && word.ends_with("ies") {
        return format!("{}y", &word[..word.len() - 3]);
    }
    if word.len() > 3 && word.ends_with('s') && !word.ends_with("ss") {
        return word[..word.len() - 1].to_string();
    }
    word.to_string()
}

/// Lower-cased alphanumeric words with stopwords removed and plurals
/// folded. camelCase identifiers are split first.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(text.len() + 8);
    let mut prev_lower = false;
    for c in text.chars() {
        if c.is_ascii_uppercase() && prev_lower {
            spaced.push(' ');
        }
        prev_lower = c.is_ascii_lowercase() || c.is_ascii_digit();
        spaced.push(c);
    }
    spaced
        .to_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty() && !STOPWORDS.contains(w))
        .map(stem)
        .collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().collect()
}

/// Hand-picked vocabulary practitioners use for each endpoint.
fn synonyms(endpoint: &str) -> &'static str {
    match endpoint {
        "get_applications_names" => "application app catalog business service portfolio monitored list",
        "get_entities" => "entity vm virtual machine container storage volume infrastructure resource instance server database owned",
        "get_actions" => "action pending optimization resize move scale placement turbonomic efficiency performance",
        "get_spending_anomaly_events" => "anomaly spike unusual spending spend cost outlier surge event",
        "get_commitment_recommendations" => "commitment reserved instance savings plan coverage purchase ri discount",
        "get_rightsizing_recommendations" => "rightsizing rightsize right sizing utilization underutilized downsize overprovisioned savings",
        _ => "",
    }
}

/// Keyword set for one endpoint: its name, description, return fields and
/// curated synonyms.
pub fn endpoint_keywords(schema: &UnifiedSchema, endpoint: &str) -> BTreeSet<String> {
    let mut words = BTreeSet::new();
    let Some(ep) = schema.endpoint(endpoint) else {
        return words;
    };
    words.extend(tokenize(&ep.name.replace('_', " ")));
    words.extend(tokenize(&ep.description));
    if let Some(t) = schema.type_def(ep.return_type.base_name()) {
        for f in &t.fields {
            words.extend(tokenize(&f.name));
        }
    }
    words.extend(tokenize(synonyms(endpoint)));
    words
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemaSubset {
    pub endpoints: Vec<String>,
    pub digest: String,
}

impl SchemaSubset {
    fn of(schema: &UnifiedSchema, names: &[&str]) -> Self {
        let digest = introspect(schema).subset(names);
        Self {
            endpoints: digest.names().iter().map(|s| s.to_string()).collect(),
            digest: digest.render(),
        }
    }

    pub fn endpoint_set(&self) -> BTreeSet<String> {
        self.endpoints.iter().cloned().collect()
    }
}

/// Per-endpoint overlap between the request's tokens and the keyword set.
pub fn endpoint_scores(nl_request: &str, schema: &UnifiedSchema) -> Vec<(String, usize)> {
    let request = token_set(nl_request);
    schema
        .endpoint_names()
        .map(|name| {
            let kw = endpoint_keywords(schema, name);
            (name.to_string(), request.intersection(&kw).count())
        })
        .collect()
}

/// Endpoints with a positive keyword score, or all of them when nothing
/// scores.
pub fn filter_schema(nl_request: &str, schema: &UnifiedSchema) -> SchemaSubset {
    let scores = endpoint_scores(nl_request, schema);
    let hits: Vec<&str> = scores
        .iter()
        .filter(|(_, s)| *s > 0)
        .map(|(n, _)| n.as_str())
        .collect();
    if hits.is_empty() {
        let all: Vec<&str> = schema.endpoint_names().collect();
        SchemaSubset::of(schema, &all)
    } else {
        SchemaSubset::of(schema, &hits)
    }
}

/// Asks the model which endpoints matter, keeping only names the schema
/// knows. Falls back to [`filter_schema`] if the answer names none.
pub fn filter_schema_with_llm(
    nl_request: &str,
    schema: &UnifiedSchema,
    llm: &dyn LlmBackend,
    params: &CompletionParams,
) -> Result<SchemaSubset, LlmError> {
    let digest = introspect(schema).render();
    let messages = [
        ChatMessage::system(format!(
            "You select GraphQL query endpoints relevant to a FinOps request.\nAvailable endpoints:\n{digest}\nAnswer with the relevant endpoint names, one per line."
        )),
        ChatMessage::user(format!("Schema filtering request: {nl_request}")),
    ];
    let answer = llm.complete(&messages, params)?;
    let named: Vec<&str> = schema
        .endpoint_names()
        .filter(|n| {
            answer
                .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .any(|w| w == *n)
        })
        .collect();
    if named.is_empty() {
        Ok(filter_schema(nl_request, schema))
    } else {
        Ok(SchemaSubset::of(schema, &named))
    }
}
