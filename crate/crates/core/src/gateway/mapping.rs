use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use super::merge::{RecordKind, UnifiedRecord};
use crate::schema::UnifiedSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Rename,
    CoerceNumber,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldMapping {
    pub vendor_field: String,
    pub unified_field: String,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MappingError {
    #[error("endpoint `{0}` has no resolver")]
    NoResolver(String),
    #[error("mapping for `{endpoint}` targets `{field}`, which {type_name} does not declare")]
    UnknownUnifiedField {
        endpoint: String,
        type_name: String,
        field: String,
    },
    #[error("mapping for `{endpoint}` leaves required field `{field}` unmapped")]
    Incomplete { endpoint: String, field: String },
    #[error("field `{field}` value {value} cannot be read as a number")]
    NotANumber { field: String, value: Value },
}

/// Vendor key spellings that differ from the unified field names.
fn vendor_renames(endpoint: &str) -> &'static [(&'static str, &'static str)] {
    match endpoint {
        "get_spending_anomaly_events" => &[("service", "application")],
        "get_rightsizing_recommendations" => &[("resourceId", "resource")],
        _ => &[],
    }
}

pub fn record_kind(schema: &UnifiedSchema, endpoint: &str) -> Option<RecordKind> {
    let ep = schema.endpoint(endpoint)?;
    RecordKind::from_type_name(ep.return_type.base_name())
}

/// Field mappings for an object-returning endpoint, one per unified field
/// of its return type.
pub fn mappings_for(schema: &UnifiedSchema, endpoint: &str) -> Result<Vec<FieldMapping>, MappingError> {
    let ep = schema
        .endpoint(endpoint)
        .ok_or_else(|| MappingError::NoResolver(endpoint.to_string()))?;
    let ty = schema
        .type_def(ep.return_type.base_name())
        .ok_or_else(|| MappingError::NoResolver(endpoint.to_string()))?;
    let renames = vendor_renames(endpoint);
    let mappings: Vec<FieldMapping> = ty
        .fields
        .iter()
        .map(|f| {
            if let Some((vendor, _)) = renames.iter().find(|(_, u)| *u == f.name) {
                FieldMapping {
                    vendor_field: vendor.to_string(),
                    unified_field: f.name.clone(),
                    transform: Transform::Rename,
                }
            } else {
                let transform = if f.ty.base_name() == "Float" {
                    Transform::CoerceNumber
                } else {
                    Transform::Identity
                };
                FieldMapping {
                    vendor_field: f.name.clone(),
                    unified_field: f.name.clone(),
                    transform,
                }
            }
        })
        .collect();
    check_mappings(schema, endpoint, &mappings)?;
    Ok(mappings)
}

/// Every mapping targets a declared field and every non-null field is covered.
pub fn check_mappings(
    schema: &UnifiedSchema,
    endpoint: &str,
    mappings: &[FieldMapping],
) -> Result<(), MappingError> {
    let ep = schema
        .endpoint(endpoint)
        .ok_or_else(|| MappingError::NoResolver(endpoint.to_string()))?;
    let type_name = ep.return_type.base_name();
    let ty = schema
        .type_def(type_name)
        .ok_or_else(|| MappingError::NoResolver(endpoint.to_string()))?;
    for m in mappings {
        if ty.field(&m.unified_field).is_none() {
            return Err(MappingError::UnknownUnifiedField {
                endpoint: endpoint.to_string(),
                type_name: type_name.to_string(),
                field: m.unified_field.clone(),
            });
        }
    }
    for f in ty.fields.iter().filter(|f| !f.nullable()) {
        if !mappings.iter().any(|m| m.unified_field == f.name) {
            return Err(MappingError::Incomplete {
                endpoint: endpoint.to_string(),
                field: f.name.clone(),
            });
        }
    }
    Ok(())
}

fn coerce_number(field: &str, v: Value) -> Result<Value, MappingError> {
    match &v {
        Value::Null => Ok(Value::Null),
        Value::Number(n) => Ok(n.as_f64().map(Value::from).unwrap_or(v)),
        Value::String(s) => s
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Value::from)
            .ok_or(MappingError::NotANumber {
                field: field.to_string(),
                value: v,
            }),
        _ => Err(MappingError::NotANumber {
            field: field.to_string(),
            value: v,
        }),
    }
}

/// Converts one vendor-shaped object to a unified record.
pub fn apply_mappings(
    kind: RecordKind,
    mappings: &[FieldMapping],
    vendor: &Map<String, Value>,
) -> Result<UnifiedRecord, MappingError> {
    let mut fields = Map::new();
    for m in mappings {
        let raw = vendor.get(&m.vendor_field).cloned().unwrap_or(Value::Null);
        let value = match m.transform {
            Transform::Identity | Transform::Rename => raw,
            Transform::CoerceNumber => coerce_number(&m.unified_field, raw)?,
        };
        fields.insert(m.unified_field.clone(), value);
    }
    Ok(UnifiedRecord::new(kind, fields))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use serde_json::json;

    #[test]
    fn renames_follow_vendor_spelling() {
        let schema = assets::unified_schema();
        let m = mappings_for(&schema, "get_rightsizing_recommendations").unwrap();
        let res = m.iter().find(|m| m.unified_field == "resource").unwrap();
        assert_eq!((res.vendor_field.as_str(), res.transform), ("resourceId", Transform::Rename));
        let m = mappings_for(&schema, "get_spending_anomaly_events").unwrap();
        assert!(m.iter().any(|m| m.vendor_field == "service" && m.unified_field == "application"));
        let m = mappings_for(&schema, "get_entities").unwrap();
        assert_eq!(
            m.iter().find(|m| m.unified_field == "cost").unwrap().transform,
            Transform::CoerceNumber
        );
    }

    #[test]
    fn every_endpoint_mapping_is_total() {
        let schema = assets::unified_schema();
        for ep in schema.endpoint_names().filter(|n| *n != "get_applications_names") {
            let m = mappings_for(&schema, ep).unwrap();
            let ty = schema.type_def(schema.endpoint(ep).unwrap().return_type.base_name()).unwrap();
            assert_eq!(m.len(), ty.fields.len());
        }
    }

    #[test]
    fn check_rejects_partial_or_foreign_mappings() {
        let schema = assets::unified_schema();
        let mut m = mappings_for(&schema, "get_entities").unwrap();
        m.retain(|m| m.unified_field != "user_id");
        assert!(matches!(
            check_mappings(&schema, "get_entities", &m),
            Err(MappingError::Incomplete { .. })
        ));
        m.push(FieldMapping {
            vendor_field: "x".into(),
            unified_field: "nope".into(),
            transform: Transform::Identity,
        });
        assert!(matches!(
            check_mappings(&schema, "get_entities", &m),
            Err(MappingError::UnknownUnifiedField { .. })
        ));
    }

    #[test]
    fn coercion() {
        assert_eq!(coerce_number("f", json!(3)).unwrap(), json!(3.0));
        assert_eq!(coerce_number("f", json!("2.5")).unwrap(), json!(2.5));
        assert!(coerce_number("f", json!("abc")).is_err());
        assert_eq!(coerce_number("f", Value::Null).unwrap(), Value::Null);
    }
}
