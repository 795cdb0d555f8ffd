use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::consolidate::ConsolidatedDataset;
use super::AgentError;
use crate::gateway::{normalize_name, Dimension, RecordKind};
use crate::llm::{ChatMessage, CompletionParams, LlmBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Rightsizing,
    Commitment,
    AnomalyRemediation,
    Placement,
    Decommission,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    Low,
    Medium,
    High,
}

/// ServiceNow-style optimization record. Field order is the serialized order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationRecord {
    pub short_description: String,
    pub description: String,
    pub category: Category,
    pub application: String,
    /// USD per month.
    pub estimated_savings: f64,
    pub priority: Priority,
    pub source_refs: Vec<String>,
}

impl RecommendationRecord {
    pub fn is_valid(&self) -> bool {
        check_record(self).is_ok()
    }
}

fn check_record(r: &RecommendationRecord) -> Result<(), String> {
    if r.short_description.trim().is_empty() {
        return Err("short_description is empty".into());
    }
    if r.application.trim().is_empty() {
        return Err("application is empty".into());
    }
    if !r.estimated_savings.is_finite() || r.estimated_savings < 0.0 {
        return Err(format!("estimated_savings {} is negative or not finite", r.estimated_savings));
    }
    if r.source_refs.is_empty() || r.source_refs.iter().any(|s| s.trim().is_empty()) {
        return Err("source_refs is empty".into());
    }
    Ok(())
}

const FIELDS: [&str; 7] = [
    "short_description",
    "description",
    "category",
    "application",
    "estimated_savings",
    "priority",
    "source_refs",
];

/// Checks one model-emitted value against the record invariants.
pub fn validate_record(value: &Value) -> Result<RecommendationRecord, String> {
    let obj = value.as_object().ok_or("record is not a JSON object")?;
    if let Some(missing) = FIELDS.iter().find(|f| obj.get(**f).is_none_or(Value::is_null)) {
        return Err(format!("missing field `{missing}`"));
    }
    let rec: RecommendationRecord = serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
    check_record(&rec)?;
    Ok(rec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    /// Largest allowed increase in monthly spend, USD.
    pub budget_delta_max: f64,
}

impl Default for Constraints {
    fn default() -> Self {
        Self { budget_delta_max: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendOutcome {
    pub records: Vec<RecommendationRecord>,
    /// Reason for each dropped record, in emission order.
    pub dropped: Vec<String>,
}

pub const ANALYSIS_RULES: &str = "You are the Analysis Agent of a FinOps assistant.\n\
Using only the consolidated dataset, propose optimization records that keep total spend within the budget constraint.\n\
Reply with a JSON array. Each element has exactly these fields:\n\
  short_description: string\n\
  description: string\n\
  category: one of rightsizing, commitment, anomaly_remediation, placement, decommission\n\
  application: string\n\
  estimated_savings: number, USD per month, >= 0\n\
  priority: one of low, medium, high\n\
  source_refs: non-empty list of record ids taken from the dataset";

pub fn analysis_messages(user_query: &str, dataset: &ConsolidatedDataset, constraints: &Constraints) -> Vec<ChatMessage> {
    let data = serde_json::to_string_pretty(dataset).unwrap_or_default();
    vec![
        ChatMessage::system(ANALYSIS_RULES),
        ChatMessage::user(format!(
            "Request: {user_query}\nConstraints: budget_delta_max = {} USD/month\nConsolidated dataset:\n{data}",
            constraints.budget_delta_max
        )),
    ]
}

/// Pulls the JSON array out of a completion: fenced block, bare array, or
/// an object with a `records` list.
fn parse_array(text: &str) -> Option<Vec<Value>> {
    let body = match text.find("```") {
        Some(start) => {
            let rest = &text[start + 3..];
            let rest = rest.split_once('\n').map(|(_, b)| b).unwrap_or(rest);
            rest.split("```").next().unwrap_or(rest)
        }
        None => text,
    };
    let candidate = match (body.find('['), body.rfind(']')) {
        (Some(a), Some(b)) if a < b => &body[a..=b],
        _ => body.trim(),
    };
    match serde_json::from_str::<Value>(candidate).ok()? {
        Value::Array(items) => Some(items),
        Value::Object(mut m) => match m.remove("records") {
            Some(Value::Array(items)) => Some(items),
            _ => None,
        },
        _ => None,
    }
}

/// Entities touched by a rightsizing and by a RESIZE action among `refs`.
fn resize_pairs(refs: &[String], dataset: &ConsolidatedDataset) -> Vec<(String, f64)> {
    let mut rs: Vec<(String, f64)> = Vec::new();
    let mut act: Vec<(String, f64)> = Vec::new();
    for id in refs {
        let Some(r) = dataset.find(id) else { continue };
        let num = |f: &str| r.fields.get(f).and_then(Value::as_f64).unwrap_or(0.0).abs();
        let name = |f: &str| {
            r.fields
                .get(f)
                .and_then(Value::as_str)
                .map(|n| normalize_name(n, Dimension::Entity))
        };
        match r.kind {
            RecordKind::RightsizingRecommendation => {
                if let Some(e) = name("resource") {
                    rs.push((e, num("estimatedSavings")));
                }
            }
            RecordKind::Action if r.fields.get("actionType").and_then(Value::as_str) == Some("RESIZE") => {
                if let Some(e) = name("target") {
                    act.push((e, num("costImpact")));
                }
            }
            _ => {}
        }
    }
    rs.iter()
        .filter_map(|(e, s)| {
            act.iter()
                .filter(|(ae, _)| ae == e)
                .map(|(_, a)| a.max(*s))
                .reduce(f64::max)
                .map(|best| (e.clone(), best))
        })
        .collect()
}

/// Entities a record touches through a rightsizing or a RESIZE action.
fn resize_entities(rec: &RecommendationRecord, dataset: &ConsolidatedDataset) -> BTreeSet<String> {
    rec.source_refs
        .iter()
        .filter_map(|id| dataset.find(id))
        .filter_map(|r| match r.kind {
            RecordKind::RightsizingRecommendation => r.fields.get("resource"),
            RecordKind::Action if r.fields.get("actionType").and_then(Value::as_str) == Some("RESIZE") => {
                r.fields.get("target")
            }
            _ => None,
        })
        .filter_map(Value::as_str)
        .map(|n| normalize_name(n, Dimension::Entity))
        .collect()
}

/// A rightsizing and a RESIZE action on the same entity become one record
/// carrying the larger absolute savings.
pub fn apply_overlap_rule(
    records: Vec<RecommendationRecord>,
    dataset: &ConsolidatedDataset,
) -> Vec<RecommendationRecord> {
    let mut out: Vec<RecommendationRecord> = Vec::new();
    for rec in records {
        let touched = resize_entities(&rec, dataset);
        let partner = out.iter().position(|kept| {
            let shared: Vec<String> = resize_entities(kept, dataset).intersection(&touched).cloned().collect();
            if shared.is_empty() {
                return false;
            }
            let mut refs = kept.source_refs.clone();
            refs.extend(rec.source_refs.iter().cloned());
            resize_pairs(&refs, dataset).iter().any(|(e, _)| shared.contains(e))
        });
        match partner {
            Some(i) => {
                let kept = &mut out[i];
                for r in rec.source_refs {
                    if !kept.source_refs.contains(&r) {
                        kept.source_refs.push(r);
                    }
                }
                kept.priority = kept.priority.max(rec.priority);
            }
            None => out.push(rec),
        }
    }
    for rec in &mut out {
        if let Some(best) = resize_pairs(&rec.source_refs, dataset)
            .into_iter()
            .map(|(_, s)| s)
            .reduce(f64::max)
        {
            rec.estimated_savings = best;
        }
    }
    out
}

/// Runs the analysis agent over `dataset`. Invalid records are dropped and
/// counted; zero survivors is an error.
pub fn recommend(
    user_query: &str,
    dataset: &ConsolidatedDataset,
    constraints: &Constraints,
    llm: &dyn LlmBackend,
    params: &CompletionParams,
) -> Result<RecommendOutcome, AgentError> {
    if dataset.is_empty() {
        return Err(AgentError::NoRecommendations { dropped: Vec::new() });
    }
    let raw = llm.complete(&analysis_messages(user_query, dataset, constraints), params)?;
    let outcome = parse_records(&raw, dataset);
    if outcome.records.is_empty() {
        return Err(AgentError::NoRecommendations {
            dropped: outcome.dropped,
        });
    }
    Ok(outcome)
}

/// Parse, validate and merge overlapping records from one completion.
pub fn parse_records(raw: &str, dataset: &ConsolidatedDataset) -> RecommendOutcome {
    let Some(items) = parse_array(raw) else {
        return RecommendOutcome {
            records: Vec::new(),
            dropped: vec!["response holds no JSON array of records".into()],
        };
    };
    let mut records = Vec::new();
    let mut dropped = Vec::new();
    for (i, item) in items.iter().enumerate() {
        match validate_record(item) {
            Ok(r) => records.push(r),
            Err(why) => dropped.push(format!("record {i}: {why}")),
        }
    }
    RecommendOutcome {
        records: apply_overlap_rule(records, dataset),
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::consolidate::{consolidate, DatasetRecord};
    use crate::llm::ScriptedBackend;
    use serde_json::{json, Map};

    fn rec(kind: RecordKind, v: Value) -> DatasetRecord {
        DatasetRecord {
            kind,
            fields: v.as_object().cloned().unwrap_or_else(Map::new),
            provenance: 1,
        }
    }

    fn dataset() -> ConsolidatedDataset {
        let mut ds = consolidate(&[]);
        ds.unattributed = vec![
            rec(
                RecordKind::RightsizingRecommendation,
                json!({"id": "RS-1", "resource": "vm-ob-01", "estimatedSavings": 220.0}),
            ),
            rec(
                RecordKind::Action,
                json!({"id": "A-101", "target": "VM_OB_01", "actionType": "RESIZE", "costImpact": -250.0}),
            ),
            rec(
                RecordKind::Action,
                json!({"id": "A-102", "target": "vm-ob-02", "actionType": "MOVE", "costImpact": -35.0}),
            ),
        ];
        ds.commitments = vec![rec(
            RecordKind::CommitmentRecommendation,
            json!({"id": "CR-1", "potentialSavings": 5400.0}),
        )];
        ds
    }

    fn record(refs: &[&str], savings: f64) -> RecommendationRecord {
        RecommendationRecord {
            short_description: "x".into(),
            description: "y".into(),
            category: Category::Rightsizing,
            application: "OnlineBoutique".into(),
            estimated_savings: savings,
            priority: Priority::Medium,
            source_refs: refs.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn rightsizing_and_resize_merge_with_larger_savings() {
        let out = apply_overlap_rule(
            vec![record(&["RS-1"], 220.0), record(&["CR-1"], 5400.0), record(&["A-101"], 250.0)],
            &dataset(),
        );
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].source_refs, vec!["RS-1", "A-101"]);
        assert_eq!(out[0].estimated_savings, 250.0);
        assert_eq!(out[1].source_refs, vec!["CR-1"]);
    }

    #[test]
    fn non_resize_actions_do_not_merge() {
        let out = apply_overlap_rule(vec![record(&["RS-1"], 220.0), record(&["A-102"], 35.0)], &dataset());
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].estimated_savings, 220.0);
    }

    #[test]
    fn missing_category_is_dropped_and_counted() {
        let good = serde_json::to_value(record(&["CR-1"], 1.0)).unwrap();
        let mut bad = good.clone();
        bad.as_object_mut().unwrap().remove("category");
        let text = format!("Here you go:\n```json\n{}\n```", json!([good, bad]));
        let out = parse_records(&text, &dataset());
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.dropped.len(), 1);
        assert!(out.dropped[0].contains("category"));
    }

    #[test]
    fn invariants_reject_bad_values() {
        let base = serde_json::to_value(record(&["CR-1"], 1.0)).unwrap();
        for (field, value) in [
            ("estimated_savings", json!(-1.0)),
            ("source_refs", json!([])),
            ("category", json!("migration")),
            ("priority", json!("urgent")),
        ] {
            let mut v = base.clone();
            v[field] = value;
            assert!(validate_record(&v).is_err(), "{field}");
        }
        assert!(validate_record(&base).is_ok());
    }

    #[test]
    fn empty_dataset_short_circuits() {
        let llm = ScriptedBackend::from_json("none", "[]").unwrap();
        let err = recommend("q", &ConsolidatedDataset::default(), &Constraints::default(), &llm, &Default::default())
            .unwrap_err();
        assert!(matches!(err, AgentError::NoRecommendations { .. }));
        assert_eq!(llm.consumed(), 0);
    }

    #[test]
    fn unparseable_reply_yields_no_records() {
        let llm = ScriptedBackend::from_json("prose", r#"[{"response": "I recommend saving money."}]"#).unwrap();
        let err = recommend("q", &dataset(), &Constraints::default(), &llm, &Default::default()).unwrap_err();
        assert!(matches!(err, AgentError::NoRecommendations { ref dropped } if dropped.len() == 1));
    }
}
