//! HTTP front end: `POST /graphql` and `GET /healthz`.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::{DataSource, LocalGateway, ResultDocument};
use crate::schema::{default_aliases_path, load_schema, SchemaError};
use crate::vendor::{load_fixtures, VendorError};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_SCHEMA_PATH: &str = "schema/unified.graphql";
pub const DEFAULT_FIXTURES_PATH: &str = "fixtures/v1";

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub addr: String,
    pub schema_path: PathBuf,
    /// Defaults to `aliases.json` beside the schema.
    pub aliases_path: Option<PathBuf>,
    pub fixtures_path: PathBuf,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            addr: DEFAULT_ADDR.into(),
            schema_path: DEFAULT_SCHEMA_PATH.into(),
            aliases_path: None,
            fixtures_path: DEFAULT_FIXTURES_PATH.into(),
        }
    }
}

impl GatewayConfig {
    /// Reads `GATEWAY_ADDR`, `SCHEMA_PATH` and `FIXTURES_PATH`, falling back
    /// to the defaults.
    pub fn from_env() -> Self {
        let d = Self::default();
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        Self {
            addr: var("GATEWAY_ADDR").unwrap_or(d.addr),
            schema_path: var("SCHEMA_PATH").map(PathBuf::from).unwrap_or(d.schema_path),
            aliases_path: None,
            fixtures_path: var("FIXTURES_PATH").map(PathBuf::from).unwrap_or(d.fixtures_path),
        }
    }

    /// Loads schema, alias table and fixtures.
    pub fn load(&self) -> Result<LocalGateway, ServeError> {
        let aliases = self
            .aliases_path
            .clone()
            .unwrap_or_else(|| default_aliases_path(&self.schema_path));
        let aliases = aliases.is_file().then_some(aliases);
        let schema = load_schema(&self.schema_path, aliases.as_deref())?;
        schema.check_unified()?;
        let store = load_fixtures(&self.fixtures_path)?;
        Ok(LocalGateway::new(schema, store))
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("BindError: cannot listen on {addr}: {message}")]
    Bind { addr: String, message: String },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Fixtures(#[from] VendorError),
    #[error("server error: {0}")]
    Io(String),
}

/// Shared readiness slot; handlers answer 503 until a gateway is installed.
#[derive(Default)]
pub struct GatewayState {
    loaded: RwLock<Option<Arc<LocalGateway>>>,
}

impl GatewayState {
    pub fn pending() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn ready(gateway: LocalGateway) -> Arc<Self> {
        let s = Self::default();
        s.install(gateway);
        Arc::new(s)
    }

    pub fn install(&self, gateway: LocalGateway) {
        *self.loaded.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(gateway));
    }

    pub fn gateway(&self) -> Option<Arc<LocalGateway>> {
        self.loaded.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

#[derive(Deserialize)]
struct GraphqlRequest {
    query: String,
    #[serde(default)]
    variables: Option<Value>,
}

async fn healthz(State(state): State<Arc<GatewayState>>) -> Response {
    match state.gateway() {
        Some(_) => (StatusCode::OK, Json(json!({"status": "ready"}))).into_response(),
        None => (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"status": "loading"}))).into_response(),
    }
}

fn body(result: &ResultDocument, elapsed_ms: f64) -> Value {
    json!({
        "data": result.data,
        "errors": result.errors,
        "extensions": { "provenance": result.provenance, "elapsed_ms": elapsed_ms },
    })
}

async fn graphql(State(state): State<Arc<GatewayState>>, Json(req): Json<GraphqlRequest>) -> Response {
    let Some(gw) = state.gateway() else {
        return (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({"data": null, "errors": [{"path": [], "message": "gateway is still loading"}]})),
        )
            .into_response();
    };
    let started = Instant::now();
    let has_variables = match &req.variables {
        None | Some(Value::Null) => false,
        Some(Value::Object(m)) => !m.is_empty(),
        Some(_) => true,
    };
    let result = if has_variables {
        ResultDocument::failed("UnsupportedConstruct: variables are not supported")
    } else {
        gw.run(&req.query)
    };
    let ms = started.elapsed().as_secs_f64() * 1000.0;
    (StatusCode::OK, Json(body(&result, ms))).into_response()
}

pub fn router(state: Arc<GatewayState>) -> Router {
    Router::new()
        .route("/graphql", post(graphql))
        .route("/healthz", get(healthz))
        .with_state(state)
}

/// Binds `addr` and serves `app` until `shutdown` resolves.
pub async fn serve_router(
    addr: &str,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
    on_bound: impl FnOnce(SocketAddr),
) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServeError::Bind {
            addr: addr.to_string(),
            message: e.to_string(),
        })?;
    let local = listener.local_addr().map_err(|e| ServeError::Io(e.to_string()))?;
    on_bound(local);
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| ServeError::Io(e.to_string()))
}

/// Loads everything named in `config`, then serves the gateway routes
/// merged with `extra` until `shutdown` resolves.
pub async fn serve(
    config: &GatewayConfig,
    extra: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let gateway = config.load()?;
    let app = router(GatewayState::ready(gateway)).merge(extra);
    serve_router(&config.addr, app, shutdown, |a| {
        tracing::info!(%a, "gateway listening");
    })
    .await
}
