use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::mapping::{apply_mappings, mappings_for, record_kind};
use super::merge::{merge_and_dedupe, normalize_name, Dimension};
use crate::schema::validate::lookup_arg;
use crate::schema::{
    parse_query, validate_query, EndpointDef, FieldSelection, QueryDocument, UnifiedSchema,
    ValidationReport, Vendor,
};
use crate::vendor::{self, VendorStore};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub vendor: Vendor,
    pub operation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathError {
    pub path: Vec<String>,
    pub message: String,
}

/// GraphQL-style response: `data` is null only when the document never
/// reached execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub data: Option<IndexMap<String, Value>>,
    #[serde(default)]
    pub errors: Vec<PathError>,
    #[serde(default)]
    pub provenance: IndexMap<String, Provenance>,
}

impl ResultDocument {
    pub fn rejected(report: &ValidationReport) -> Self {
        Self {
            data: None,
            errors: report
                .errors
                .iter()
                .map(|e| PathError {
                    path: e.path.clone(),
                    message: e.to_string(),
                })
                .collect(),
            provenance: IndexMap::new(),
        }
    }

    pub fn failed(message: impl Into<String>) -> Self {
        Self {
            data: None,
            errors: vec![PathError {
                path: Vec::new(),
                message: message.into(),
            }],
            provenance: IndexMap::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.data.is_some() && self.errors.is_empty()
    }

    /// Error messages for one top-level key.
    pub fn errors_at(&self, key: &str) -> Vec<&str> {
        self.errors
            .iter()
            .filter(|e| e.path.first().map(String::as_str) == Some(key))
            .map(|e| e.message.as_str())
            .collect()
    }
}

fn operation_for(endpoint: &str) -> &'static str {
    match endpoint {
        "get_applications_names" => "turbo_list_applications",
        "get_entities" => "turbo_list_entities",
        "get_actions" => "turbo_list_actions",
        "get_spending_anomaly_events" => "apptio_list_anomalies",
        "get_commitment_recommendations" => "apptio_list_commitments",
        "get_rightsizing_recommendations" => "apptio_list_rightsizings",
        _ => "none",
    }
}

/// Text of the argument whose schema name is `canonical`, however the
/// query spelled it.
fn arg_text(sel: &FieldSelection, ep: &EndpointDef, canonical: &str) -> Option<String> {
    sel.arguments
        .iter()
        .find(|(name, _)| lookup_arg(ep, name).is_some_and(|a| a.name == canonical))
        .map(|(_, lit)| lit.as_text().map(str::to_string).unwrap_or_else(|| lit.to_string()))
}

/// Maps a caller-supplied application name onto the store's spelling.
fn resolve_application(store: &VendorStore, raw: &str) -> String {
    let want = normalize_name(raw, Dimension::Application);
    store
        .turbonomic
        .applications
        .iter()
        .find(|a| normalize_name(a, Dimension::Application) == want)
        .cloned()
        .unwrap_or_else(|| raw.to_string())
}

fn resolve_entity(store: &VendorStore, raw: &str) -> String {
    let want = normalize_name(raw, Dimension::Entity);
    store
        .turbonomic
        .entities
        .values()
        .flatten()
        .find(|e| normalize_name(&e.name, Dimension::Entity) == want)
        .map(|e| e.name.clone())
        .unwrap_or_else(|| raw.to_string())
}

fn to_objects<T: Serialize>(recs: Vec<T>) -> Vec<Map<String, Value>> {
    recs.into_iter()
        .filter_map(|r| match serde_json::to_value(r) {
            Ok(Value::Object(m)) => Some(m),
            _ => None,
        })
        .collect()
}

/// Vendor-shaped objects for one endpoint call.
fn fetch(
    sel: &FieldSelection,
    ep: &EndpointDef,
    store: &VendorStore,
) -> Result<Vec<Map<String, Value>>, String> {
    let app = arg_text(sel, ep, "app_name").map(|a| resolve_application(store, &a));
    Ok(match ep.name.as_str() {
        "get_entities" => {
            let app = arg_text(sel, ep, "application_name")
                .map(|a| resolve_application(store, &a))
                .ok_or("missing required argument application_name")?;
            to_objects(vendor::turbo_list_entities(store, &app))
        }
        "get_actions" => {
            let entity = arg_text(sel, ep, "entity_name").map(|e| resolve_entity(store, &e));
            let actions = vendor::turbo_list_actions(store, entity.as_deref(), app.as_deref())
                .map_err(|e| e.to_string())?;
            to_objects(actions)
        }
        "get_spending_anomaly_events" => to_objects(vendor::apptio_list_anomalies(store, app.as_deref())),
        "get_commitment_recommendations" => to_objects(vendor::apptio_list_commitments(store)),
        "get_rightsizing_recommendations" => {
            to_objects(vendor::apptio_list_rightsizings(store, app.as_deref()))
        }
        other => return Err(format!("no resolver for `{other}`")),
    })
}

fn project(fields: &Map<String, Value>, selections: &[FieldSelection]) -> Value {
    let mut out = Map::new();
    for s in selections {
        let v = fields.get(&s.name).cloned().unwrap_or(Value::Null);
        let v = match v {
            Value::Object(inner) if !s.selections.is_empty() => project(&inner, &s.selections),
            other => other,
        };
        out.insert(s.response_key().to_string(), v);
    }
    Value::Object(out)
}

fn resolve_selection(
    sel: &FieldSelection,
    ep: &EndpointDef,
    schema: &UnifiedSchema,
    store: &VendorStore,
) -> Result<Value, String> {
    if ep.name == "get_applications_names" {
        let mut seen = Vec::new();
        let mut names = Vec::new();
        for a in vendor::turbo_list_applications(store) {
            let key = normalize_name(&a, Dimension::Application);
            if !seen.contains(&key) {
                seen.push(key);
                names.push(Value::String(a));
            }
        }
        return Ok(Value::Array(names));
    }
    let kind = record_kind(schema, &ep.name).ok_or_else(|| format!("no resolver for `{}`", ep.name))?;
    let mappings = mappings_for(schema, &ep.name).map_err(|e| e.to_string())?;
    let records = fetch(sel, ep, store)?
        .iter()
        .map(|obj| apply_mappings(kind, &mappings, obj))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let merged = merge_and_dedupe(records).map_err(|e| e.to_string())?;
    Ok(Value::Array(
        merged.iter().map(|r| project(&r.fields, &sel.selections)).collect(),
    ))
}

/// Resolves each top-level selection against its vendor adapter, in
/// document order. A failing selection yields `null` plus a path error and
/// never affects its siblings.
pub fn execute_query(doc: &QueryDocument, schema: &UnifiedSchema, store: &VendorStore) -> ResultDocument {
    let mut data = IndexMap::new();
    let mut errors = Vec::new();
    let mut provenance = IndexMap::new();
    for sel in &doc.selections {
        let key = sel.response_key().to_string();
        let Some((ep, _)) = schema.resolve_endpoint(&sel.name) else {
            errors.push(PathError {
                path: vec![key.clone()],
                message: format!("UnknownEndpoint: `{}`", sel.name),
            });
            data.insert(key.clone(), Value::Null);
            provenance.insert(
                key,
                Provenance {
                    vendor: Vendor::Unknown,
                    operation: "none".into(),
                },
            );
            continue;
        };
        provenance.insert(
            key.clone(),
            Provenance {
                vendor: ep.source_vendor,
                operation: operation_for(&ep.name).into(),
            },
        );
        match resolve_selection(sel, ep, schema, store) {
            Ok(v) => {
                data.insert(key, v);
            }
            Err(message) => {
                errors.push(PathError {
                    path: vec![key.clone()],
                    message,
                });
                data.insert(key, Value::Null);
            }
        }
    }
    ResultDocument {
        data: Some(data),
        errors,
        provenance,
    }
}

/// Parse, validate and execute in one step.
pub fn run_query(query_text: &str, schema: &UnifiedSchema, store: &VendorStore) -> ResultDocument {
    let doc = match parse_query(query_text) {
        Ok(doc) => doc,
        Err(e) => return ResultDocument::rejected(&ValidationReport::from_parse_error(&e)),
    };
    let report = validate_query(&doc, schema);
    if !report.valid {
        return ResultDocument::rejected(&report);
    }
    execute_query(&doc, schema, store)
}
