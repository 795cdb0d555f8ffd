use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::AgentError;
use crate::gateway::DataSource;
use crate::schema::{introspect, FieldSelection, Literal, QueryDocument, UnifiedSchema, CANONICAL_ENDPOINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolCategory {
    ApplicationDiscovery,
    FinancialAnalysis,
    OptimizationRecommendations,
}

impl ToolCategory {
    fn of(tool: &str) -> Self {
        match tool {
            "get_applications_names" | "get_entities" => ToolCategory::ApplicationDiscovery,
            "get_spending_anomaly_events" | "get_commitment_recommendations" => ToolCategory::FinancialAnalysis,
            _ => ToolCategory::OptimizationRecommendations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolSpec {
    pub name: String,
    pub signature: String,
    pub description: String,
    pub category: ToolCategory,
}

impl ToolSpec {
    pub fn render(&self) -> String {
        format!("- {}{}: {}", self.name, self.signature, self.description)
    }
}

/// The six retrieval tools, one per canonical endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolRegistry {
    tools: Vec<ToolSpec>,
}

impl ToolRegistry {
    pub fn from_schema(schema: &UnifiedSchema) -> Result<Self, AgentError> {
        let digest = introspect(schema);
        let mut tools = Vec::with_capacity(CANONICAL_ENDPOINTS.len());
        for name in CANONICAL_ENDPOINTS {
            let entry = digest
                .entry(name)
                .ok_or_else(|| AgentError::IncompleteRegistry(name.to_string()))?;
            tools.push(ToolSpec {
                name: name.to_string(),
                signature: entry.signature.clone(),
                description: entry.description.clone(),
                category: ToolCategory::of(name),
            });
        }
        Ok(Self { tools })
    }

    pub fn tools(&self) -> &[ToolSpec] {
        &self.tools
    }

    pub fn names(&self) -> Vec<&str> {
        self.tools.iter().map(|t| t.name.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.iter().find(|t| t.name == name)
    }

    /// Bulleted tool list grouped by category, used in every agent prompt.
    pub fn digest(&self) -> String {
        let mut out = String::new();
        for (cat, title) in [
            (ToolCategory::ApplicationDiscovery, "Application discovery"),
            (ToolCategory::FinancialAnalysis, "Financial analysis"),
            (ToolCategory::OptimizationRecommendations, "Optimization recommendations"),
        ] {
            out.push_str(title);
            out.push_str(":\n");
            for t in self.tools.iter().filter(|t| t.category == cat) {
                out.push_str(&t.render());
                out.push('\n');
            }
        }
        out
    }
}

/// Result of one tool invocation, as fed back to the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    Data {
        payload: indexmap::IndexMap<String, Value>,
        /// Errors on sibling selections when only part of a query failed.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        errors: Vec<String>,
    },
    Error { message: String },
}

impl Observation {
    pub fn is_error(&self) -> bool {
        match self {
            Observation::Data { errors, .. } => !errors.is_empty(),
            Observation::Error { .. } => true,
        }
    }

    /// Compact text shown to the model.
    pub fn render(&self) -> String {
        match self {
            Observation::Data { payload, errors } if errors.is_empty() => {
                serde_json::to_string(payload).unwrap_or_default()
            }
            Observation::Data { payload, errors } => format!(
                "{} ERRORS: {}",
                serde_json::to_string(payload).unwrap_or_default(),
                errors.join("; ")
            ),
            Observation::Error { message } => format!("ERROR: {message}"),
        }
    }
}

/// Canonical query for `tool` selecting every field of its return type.
pub fn synthesize_query(
    schema: &UnifiedSchema,
    tool: &str,
    args: &serde_json::Map<String, Value>,
) -> Result<QueryDocument, String> {
    let ep = schema
        .endpoint(tool)
        .ok_or_else(|| format!("unknown tool: {tool}"))?;
    let mut sel = FieldSelection::new(&ep.name);
    for (k, v) in args {
        if v.is_null() {
            continue;
        }
        let lit = Literal::from_json(v)
            .ok_or_else(|| format!("argument `{k}` of {tool} must be a scalar, got {v}"))?;
        sel = sel.with_arg(k, lit);
    }
    if let Some(ty) = schema.type_def(ep.return_type.base_name()) {
        sel = sel.with_fields(ty.fields.iter().map(|f| f.name.as_str()));
    }
    Ok(QueryDocument::new(vec![sel]))
}

/// Dispatches one named tool through `source`. Never fails: problems come
/// back as error observations.
pub fn invoke_tool(
    registry: &ToolRegistry,
    source: &dyn DataSource,
    name: &str,
    args: &Value,
) -> (String, Observation) {
    let canonical = match registry.get(name) {
        Some(t) => t.name.clone(),
        None => match source.schema().resolve_endpoint(name) {
            Some((ep, _)) if registry.get(&ep.name).is_some() => ep.name.clone(),
            _ => {
                let message = format!("unknown tool: {name}; available: {}", registry.names().join(", "));
                return (name.to_string(), Observation::Error { message });
            }
        },
    };
    let empty = serde_json::Map::new();
    let args = match args {
        Value::Object(m) => m,
        Value::Null => &empty,
        other => {
            let message = format!("Action Input for {canonical} must be a JSON object, got {other}");
            return (canonical, Observation::Error { message });
        }
    };
    let doc = match synthesize_query(source.schema(), &canonical, args) {
        Ok(d) => d,
        Err(message) => return (canonical, Observation::Error { message }),
    };
    let result = source.execute(&doc);
    let obs = if result.errors.is_empty() {
        Observation::Data {
            payload: result.data.unwrap_or_default(),
            errors: Vec::new(),
        }
    } else {
        let messages: Vec<&str> = result.errors.iter().map(|e| e.message.as_str()).collect();
        Observation::Error {
            message: messages.join("; "),
        }
    };
    (canonical, obs)
}
