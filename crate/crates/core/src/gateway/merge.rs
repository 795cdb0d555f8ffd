use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Shared dimensions whose names get normalized before joining.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Application,
    Entity,
}

/// Trim, case-fold, and collapse runs of whitespace, `_` and `-` into a
/// single `-`. Idempotent. Both dimensions currently share one rule.
pub fn normalize_name(raw: &str, _dimension: Dimension) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut in_run = false;
    for c in raw.trim().chars() {
        if c.is_whitespace() || c == '_' || c == '-' {
            if !in_run {
                out.push('-');
            }
            in_run = true;
        } else {
            in_run = false;
            out.extend(c.to_lowercase());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RecordKind {
    Entity,
    Action,
    SpendingAnomaly,
    CommitmentRecommendation,
    RightsizingRecommendation,
}

impl RecordKind {
    pub const ALL: [RecordKind; 5] = [
        RecordKind::Entity,
        RecordKind::Action,
        RecordKind::SpendingAnomaly,
        RecordKind::CommitmentRecommendation,
        RecordKind::RightsizingRecommendation,
    ];

    pub fn type_name(self) -> &'static str {
        match self {
            RecordKind::Entity => "Entity",
            RecordKind::Action => "Action",
            RecordKind::SpendingAnomaly => "SpendingAnomaly",
            RecordKind::CommitmentRecommendation => "CommitmentRecommendation",
            RecordKind::RightsizingRecommendation => "RightsizingRecommendation",
        }
    }

    pub fn from_type_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.type_name() == name)
    }

    /// Endpoint returning records of this kind.
    pub fn endpoint(self) -> &'static str {
        match self {
            RecordKind::Entity => "get_entities",
            RecordKind::Action => "get_actions",
            RecordKind::SpendingAnomaly => "get_spending_anomaly_events",
            RecordKind::CommitmentRecommendation => "get_commitment_recommendations",
            RecordKind::RightsizingRecommendation => "get_rightsizing_recommendations",
        }
    }

    /// Field naming the other side of a join, used for keys without an id.
    fn join_field(self) -> Option<&'static str> {
        match self {
            RecordKind::Action => Some("target"),
            RecordKind::RightsizingRecommendation => Some("resource"),
            RecordKind::SpendingAnomaly => Some("application"),
            RecordKind::Entity => Some("name"),
            RecordKind::CommitmentRecommendation => Some("service"),
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.type_name())
    }
}

/// One record in unified-schema field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedRecord {
    pub kind: RecordKind,
    pub fields: Map<String, Value>,
}

impl UnifiedRecord {
    pub fn new(kind: RecordKind, fields: Map<String, Value>) -> Self {
        Self { kind, fields }
    }

    pub fn get(&self, field: &str) -> Option<&Value> {
        self.fields.get(field).filter(|v| !v.is_null())
    }

    pub fn str_field(&self, field: &str) -> Option<&str> {
        self.get(field).and_then(Value::as_str)
    }

    /// Id rendered as text (`Int` ids become their decimal form).
    pub fn id(&self) -> Option<String> {
        match self.get("id")? {
            Value::String(s) => Some(s.clone()),
            other => Some(other.to_string()),
        }
    }

    /// Identity used for deduplication: the id when present, else the
    /// normalized join field, else the whole record.
    pub fn dedup_key(&self) -> String {
        if let Some(id) = self.id() {
            return format!("id:{}", id.trim());
        }
        if let Some(v) = self.kind.join_field().and_then(|f| self.str_field(f)) {
            let app = self
                .str_field("application")
                .map(|a| normalize_name(a, Dimension::Application))
                .unwrap_or_default();
            return format!("ref:{app}|{}", normalize_name(v, Dimension::Entity));
        }
        format!("raw:{}", Value::Object(self.fields.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MergeError {
    #[error("KeyConflict: two {kind} records share key `{key}` but differ on `{field}` ({first} vs {second})")]
    KeyConflict {
        kind: RecordKind,
        key: String,
        field: String,
        first: Value,
        second: Value,
    },
    #[error("MixedTypes: cannot merge {0} records with {1} records")]
    MixedTypes(RecordKind, RecordKind),
}

/// First non-null scalar field on which the two records disagree. Name
/// fields are compared after normalization.
pub(crate) fn conflicting_field(a: &UnifiedRecord, b: &UnifiedRecord) -> Option<(String, Value, Value)> {
    let name_fields = [a.kind.join_field(), Some("application")];
    for (name, va) in &a.fields {
        let Some(vb) = b.fields.get(name) else { continue };
        if va.is_null() || vb.is_null() || va.is_array() || va.is_object() {
            continue;
        }
        let same = match (va.as_str(), vb.as_str()) {
            (Some(x), Some(y)) if name_fields.contains(&Some(name.as_str())) => {
                normalize_name(x, Dimension::Entity) == normalize_name(y, Dimension::Entity)
            }
            _ => scalar_eq(va, vb),
        };
        if !same {
            return Some((name.clone(), va.clone(), vb.clone()));
        }
    }
    None
}

fn scalar_eq(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

/// Collapses records with equal [`UnifiedRecord::dedup_key`]; the first
/// occurrence is kept and relative order is preserved.
pub fn merge_and_dedupe(records: Vec<UnifiedRecord>) -> Result<Vec<UnifiedRecord>, MergeError> {
    let Some(kind) = records.first().map(|r| r.kind) else {
        return Ok(records);
    };
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<UnifiedRecord> = Vec::new();
    for rec in records {
        if rec.kind != kind {
            return Err(MergeError::MixedTypes(kind, rec.kind));
        }
        let key = rec.dedup_key();
        match seen.get(&key) {
            Some(&i) => {
                if let Some((field, first, second)) = conflicting_field(&out[i], &rec) {
                    return Err(MergeError::KeyConflict {
                        kind,
                        key,
                        field,
                        first,
                        second,
                    });
                }
            }
            None => {
                seen.insert(key, out.len());
                out.push(rec);
            }
        }
    }
    Ok(out)
}
