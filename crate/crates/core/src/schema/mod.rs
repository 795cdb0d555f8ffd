//! The unified FinOps GraphQL schema: SDL parsing, query parsing, validation
//! and a compact introspection digest for prompts.
//!
//! Only the subset of GraphQL the agent needs is supported: object types,
//! `extend type`, custom scalars, and query operations made of fields,
//! arguments, aliases and nested selections.

mod digest;
pub(crate) mod lexer;
mod query;
mod sdl;
pub(crate) mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use digest::{introspect, DigestEntry, SchemaDigest, DIGEST_BYTE_LIMIT};
pub use query::{parse_query, FieldSelection, Literal, QueryDocument, QueryError};
pub use sdl::parse_schema;
pub use validate::{validate_query, ErrorCode, ValidationError, ValidationReport};

/// The six query endpoints, one per data retrieval tool.
pub const CANONICAL_ENDPOINTS: [&str; 6] = [
    "get_applications_names",
    "get_entities",
    "get_actions",
    "get_spending_anomaly_events",
    "get_commitment_recommendations",
    "get_rightsizing_recommendations",
];

pub const BUILTIN_SCALARS: [&str; 5] = ["Int", "Float", "String", "Boolean", "ID"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vendor {
    Turbonomic,
    Apptio,
    Unknown,
}

impl fmt::Display for Vendor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Vendor::Turbonomic => "turbonomic",
            Vendor::Apptio => "apptio",
            Vendor::Unknown => "unknown",
        })
    }
}

/// Vendor and one-line description for endpoints whose SDL carries none.
pub(crate) fn builtin_endpoint_info(name: &str) -> (Vendor, &'static str) {
    match name {
        "get_applications_names" => (
            Vendor::Turbonomic,
            "Catalog of business application names monitored across the infrastructure.",
        ),
        "get_entities" => (
            Vendor::Turbonomic,
            "Infrastructure entities (VMs, containers, storage volumes) owned by one application, with monthly cost.",
        ),
        "get_actions" => (
            Vendor::Turbonomic,
            "Pending optimization actions (resize, move, scale, placement) for one entity, one application, or all.",
        ),
        "get_spending_anomaly_events" => (
            Vendor::Apptio,
            "Unusual spending events and cost anomalies, per application or across all applications.",
        ),
        "get_commitment_recommendations" => (
            Vendor::Apptio,
            "Reserved instance and savings plan coverage with recommended commitment purchases.",
        ),
        "get_rightsizing_recommendations" => (
            Vendor::Apptio,
            "Rightsizing recommendations derived from resource utilization, optionally per application.",
        ),
        _ => (Vendor::Unknown, ""),
    }
}

/// A GraphQL type reference such as `[Entity]` or `String!`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeRef {
    Named(String),
    List(Box<TypeRef>),
    NonNull(Box<TypeRef>),
}

impl TypeRef {
    pub fn named(name: &str) -> Self {
        TypeRef::Named(name.to_string())
    }

    /// Innermost named type.
    pub fn base_name(&self) -> &str {
        match self {
            TypeRef::Named(n) => n,
            TypeRef::List(inner) | TypeRef::NonNull(inner) => inner.base_name(),
        }
    }

    pub fn is_non_null(&self) -> bool {
        matches!(self, TypeRef::NonNull(_))
    }

    pub fn is_list(&self) -> bool {
        match self {
            TypeRef::List(_) => true,
            TypeRef::NonNull(inner) => inner.is_list(),
            TypeRef::Named(_) => false,
        }
    }
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeRef::Named(n) => f.write_str(n),
            TypeRef::List(inner) => write!(f, "[{inner}]"),
            TypeRef::NonNull(inner) => write!(f, "{inner}!"),
        }
    }
}

impl Serialize for TypeRef {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldDef {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: TypeRef,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl FieldDef {
    pub fn nullable(&self) -> bool {
        !self.ty.is_non_null()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeDef {
    pub name: String,
    pub fields: Vec<FieldDef>,
}

impl TypeDef {
    pub fn field(&self, name: &str) -> Option<&FieldDef> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArgDef {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: TypeRef,
}

impl ArgDef {
    pub fn required(&self) -> bool {
        self.ty.is_non_null()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointDef {
    pub name: String,
    pub args: Vec<ArgDef>,
    pub return_type: TypeRef,
    pub source_vendor: Vendor,
    pub description: String,
}

impl EndpointDef {
    pub fn arg(&self, name: &str) -> Option<&ArgDef> {
        self.args.iter().find(|a| a.name == name)
    }

    /// `(a: String!, b: Int)` or the empty string when there are no args.
    pub fn signature(&self) -> String {
        if self.args.is_empty() {
            return String::new();
        }
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| format!("{}: {}", a.name, a.ty))
            .collect();
        format!("({})", args.join(", "))
    }
}

/// Parsed and cross-checked unified schema. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnifiedSchema {
    pub types: Vec<TypeDef>,
    pub scalars: Vec<String>,
    pub query_endpoints: Vec<EndpointDef>,
    pub alias_table: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("SyntaxError at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("DuplicateDefinition at {line}:{col}: `{name}` is defined more than once")]
    DuplicateDefinition {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("UndefinedType at {line}:{col}: `{name}` is not a declared type or scalar")]
    UndefinedType {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("InvalidAlias: {0}")]
    InvalidAlias(String),
    #[error("NotUnified: {0}")]
    NotUnified(String),
    #[error("failed to read {path}: {message}")]
    Io { path: String, message: String },
}

impl UnifiedSchema {
    pub fn type_def(&self, name: &str) -> Option<&TypeDef> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn endpoint(&self, name: &str) -> Option<&EndpointDef> {
        self.query_endpoints.iter().find(|e| e.name == name)
    }

    pub fn endpoint_names(&self) -> impl Iterator<Item = &str> {
        self.query_endpoints.iter().map(|e| e.name.as_str())
    }

    /// Resolves a canonical name or an alias-table key. The flag is true
    /// when an alias was applied.
    pub fn resolve_endpoint(&self, name: &str) -> Option<(&EndpointDef, bool)> {
        if let Some(ep) = self.endpoint(name) {
            return Some((ep, false));
        }
        self.alias_table
            .get(name)
            .and_then(|canonical| self.endpoint(canonical))
            .map(|ep| (ep, true))
    }

    pub fn is_scalar(&self, name: &str) -> bool {
        BUILTIN_SCALARS.contains(&name) || self.scalars.iter().any(|s| s == name)
    }

    /// Installs an alias table after checking that every value is a
    /// canonical endpoint and no key shadows one.
    pub fn with_aliases(mut self, aliases: BTreeMap<String, String>) -> Result<Self, SchemaError> {
        for (alias, canonical) in &aliases {
            if self.endpoint(alias).is_some() {
                return Err(SchemaError::InvalidAlias(format!(
                    "alias `{alias}` collides with a canonical endpoint"
                )));
            }
            if self.endpoint(canonical).is_none() {
                return Err(SchemaError::InvalidAlias(format!(
                    "alias `{alias}` targets unknown endpoint `{canonical}`"
                )));
            }
        }
        self.alias_table = aliases;
        Ok(self)
    }

    pub fn without_aliases(&self) -> Self {
        Self {
            alias_table: BTreeMap::new(),
            ..self.clone()
        }
    }

    /// Copy keeping only the named endpoints (and aliases pointing at them).
    pub fn restrict(&self, endpoints: &[&str]) -> Self {
        let keep = |n: &str| endpoints.contains(&n);
        Self {
            types: self.types.clone(),
            scalars: self.scalars.clone(),
            query_endpoints: self
                .query_endpoints
                .iter()
                .filter(|e| keep(&e.name))
                .cloned()
                .collect(),
            alias_table: self
                .alias_table
                .iter()
                .filter(|(_, v)| keep(v))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Checks that the schema exposes exactly the six canonical endpoints.
    pub fn check_unified(&self) -> Result<(), SchemaError> {
        let missing: Vec<&str> = CANONICAL_ENDPOINTS
            .iter()
            .copied()
            .filter(|n| self.endpoint(n).is_none())
            .collect();
        let extra: Vec<&str> = self
            .endpoint_names()
            .filter(|n| !CANONICAL_ENDPOINTS.contains(n))
            .collect();
        if missing.is_empty() && extra.is_empty() {
            Ok(())
        } else {
            Err(SchemaError::NotUnified(format!(
                "missing endpoints {missing:?}, unexpected endpoints {extra:?}"
            )))
        }
    }
}

pub fn parse_aliases(json: &str) -> Result<BTreeMap<String, String>, SchemaError> {
    serde_json::from_str(json).map_err(|e| SchemaError::InvalidAlias(e.to_string()))
}

/// Reads the SDL file and, when given, the alias table next to it.
pub fn load_schema(
    schema_path: &Path,
    aliases_path: Option<&Path>,
) -> Result<UnifiedSchema, SchemaError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|e| SchemaError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        })
    };
    let schema = parse_schema(&read(schema_path)?)?;
    match aliases_path {
        Some(p) => schema.with_aliases(parse_aliases(&read(p)?)?),
        None => Ok(schema),
    }
}

/// Default alias-table location: `aliases.json` beside the schema file.
pub fn default_aliases_path(schema_path: &Path) -> std::path::PathBuf {
    schema_path.with_file_name("aliases.json")
}
