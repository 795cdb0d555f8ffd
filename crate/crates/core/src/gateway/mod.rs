//! Federation gateway: resolves unified-schema queries against the vendor
//! adapters, mapping vendor fields, normalizing shared names and
//! deduplicating merged records.

mod execute;
mod mapping;
pub(crate) mod merge;
pub mod server;

use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

pub use execute::{execute_query, run_query, PathError, Provenance, ResultDocument};
pub use mapping::{apply_mappings, check_mappings, mappings_for, record_kind, FieldMapping, MappingError, Transform};
pub use merge::{merge_and_dedupe, normalize_name, Dimension, MergeError, RecordKind, UnifiedRecord};

use crate::schema::{validate_query, QueryDocument, UnifiedSchema};
use crate::vendor::VendorStore;

/// Anything that answers unified-schema queries.
pub trait DataSource: Send + Sync {
    fn schema(&self) -> &UnifiedSchema;

    /// Parses, validates and executes query text.
    fn run(&self, query_text: &str) -> ResultDocument;

    fn execute(&self, doc: &QueryDocument) -> ResultDocument {
        self.run(&doc.to_string())
    }
}

/// In-process gateway over a loaded store.
#[derive(Debug, Clone)]
pub struct LocalGateway {
    pub schema: Arc<UnifiedSchema>,
    pub store: Arc<VendorStore>,
}

impl LocalGateway {
    pub fn new(schema: UnifiedSchema, store: VendorStore) -> Self {
        Self {
            schema: Arc::new(schema),
            store: Arc::new(store),
        }
    }

    /// Shipped schema, aliases and `fixtures/v1`.
    pub fn shipped() -> Self {
        Self::new(crate::assets::unified_schema(), VendorStore::shipped())
    }
}

impl DataSource for LocalGateway {
    fn schema(&self) -> &UnifiedSchema {
        &self.schema
    }

    fn run(&self, query_text: &str) -> ResultDocument {
        run_query(query_text, &self.schema, &self.store)
    }

    fn execute(&self, doc: &QueryDocument) -> ResultDocument {
        let report = validate_query(doc, &self.schema);
        if !report.valid {
            return ResultDocument::rejected(&report);
        }
        execute_query(doc, &self.schema, &self.store)
    }
}

/// Gateway reached over HTTP. The schema is held locally for prompts and
/// tool registration; execution happens remotely.
pub struct RemoteGateway {
    schema: UnifiedSchema,
    endpoint: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct WireResponse {
    data: Option<indexmap::IndexMap<String, serde_json::Value>>,
    #[serde(default)]
    errors: Vec<PathError>,
    #[serde(default)]
    extensions: WireExtensions,
}

#[derive(Deserialize, Default)]
struct WireExtensions {
    #[serde(default)]
    provenance: indexmap::IndexMap<String, Provenance>,
}

impl RemoteGateway {
    /// `base_url` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(schema: UnifiedSchema, base_url: &str) -> Self {
        Self {
            schema,
            endpoint: format!("{}/graphql", base_url.trim_end_matches('/')),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(30))
                .build()
                .expect("http client"),
        }
    }
}

impl DataSource for RemoteGateway {
    fn schema(&self) -> &UnifiedSchema {
        &self.schema
    }

    fn run(&self, query_text: &str) -> ResultDocument {
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&serde_json::json!({ "query": query_text }))
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json::<WireResponse>());
        match resp {
            Ok(w) => ResultDocument {
                data: w.data,
                errors: w.errors,
                provenance: w.extensions.provenance,
            },
            Err(e) => ResultDocument::failed(format!("gateway transport error: {e}")),
        }
    }
}
