//! Session API consumed by the browser console:
//!
//! - `POST /sessions` `{"query": ..}` starts a run
//! - `GET /sessions/{id}/events` streams stage markers, iterations and records (SSE)
//! - `POST /sessions/{id}/followup` starts a run linked to a finished parent
//! - `GET /sessions/{id}/records` returns the JSON-lines record export
//! - `GET /sessions/{id}` returns the transcript once finished

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::watch;

use super::records::{persist_run, records_to_jsonl, timestamp_now};
use super::session::{
    run_session, Limits, ParentContext, SessionDeps, SessionEvent, SessionStatus, SessionTranscript,
};
use super::Constraints;
use crate::gateway::DataSource;
use crate::llm::{LlmBackend, LlmError};
use crate::nl2graphql::Exemplar;

pub type BackendFactory = Arc<dyn Fn() -> Result<Box<dyn LlmBackend>, LlmError> + Send + Sync>;

#[derive(Default)]
struct EventLog {
    events: Vec<SessionEvent>,
    done: bool,
    transcript: Option<SessionTranscript>,
}

struct SessionEntry {
    parent: Option<String>,
    log: Mutex<EventLog>,
    tick: watch::Sender<usize>,
}

impl SessionEntry {
    fn log(&self) -> MutexGuard<'_, EventLog> {
        self.log.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn push(&self, event: SessionEvent) {
        let n = {
            let mut log = self.log();
            log.events.push(event);
            log.events.len()
        };
        self.tick.send_replace(n);
    }

    fn close(&self, transcript: Option<SessionTranscript>, status: SessionStatus) {
        let n = {
            let mut log = self.log();
            log.events.push(SessionEvent::Done { status });
            log.transcript = transcript;
            log.done = true;
            log.events.len()
        };
        self.tick.send_replace(n);
    }
}

/// Shared state behind the session routes.
pub struct SessionHub {
    source: Arc<dyn DataSource>,
    bank: Arc<Vec<Exemplar>>,
    backend: BackendFactory,
    followup_backend: BackendFactory,
    pub limits: Limits,
    pub constraints: Constraints,
    /// When set, every finished run is persisted here.
    pub runs_dir: Option<PathBuf>,
    sessions: Mutex<HashMap<String, Arc<SessionEntry>>>,
}

impl SessionHub {
    pub fn new(source: Arc<dyn DataSource>, bank: Vec<Exemplar>, backend: BackendFactory) -> Self {
        Self {
            source,
            bank: Arc::new(bank),
            followup_backend: backend.clone(),
            backend,
            limits: Limits::default(),
            constraints: Constraints::default(),
            runs_dir: None,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    /// Backend used for follow-up sessions; defaults to the main one.
    pub fn with_followup_backend(mut self, factory: BackendFactory) -> Self {
        self.followup_backend = factory;
        self
    }

    fn sessions(&self) -> MutexGuard<'_, HashMap<String, Arc<SessionEntry>>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn entry(&self, id: &str) -> Option<Arc<SessionEntry>> {
        self.sessions().get(id).cloned()
    }

    /// Registers a session and runs it on the blocking pool.
    fn start(self: &Arc<Self>, query: String, parent: Option<ParentContext>) -> String {
        let id = uuid::Uuid::new_v4().to_string();
        let entry = Arc::new(SessionEntry {
            parent: parent.as_ref().map(|p| p.session_id.clone()),
            log: Mutex::new(EventLog::default()),
            tick: watch::channel(0).0,
        });
        self.sessions().insert(id.clone(), entry.clone());
        let hub = self.clone();
        tokio::task::spawn_blocking(move || hub.run(&query, parent, &entry));
        id
    }

    fn run(&self, query: &str, parent: Option<ParentContext>, entry: &Arc<SessionEntry>) {
        let factory = if parent.is_some() { &self.followup_backend } else { &self.backend };
        let llm = match factory() {
            Ok(b) => b,
            Err(e) => {
                entry.push(SessionEvent::Error { message: e.to_string() });
                entry.close(None, SessionStatus::LlmUnavailable);
                return;
            }
        };
        let sink = {
            let entry = entry.clone();
            move |e: &SessionEvent| {
                // the final marker is sent once the transcript is stored
                if !matches!(e, SessionEvent::Done { .. }) {
                    entry.push(e.clone());
                }
            }
        };
        let mut deps = SessionDeps::new(self.source.as_ref(), llm.as_ref(), &self.bank);
        deps.limits = self.limits;
        deps.constraints = self.constraints;
        deps.observer = Some(&sink);
        deps.parent = parent;
        let transcript = match run_session(query, &deps) {
            Ok(t) => t,
            Err(f) => *f.transcript,
        };
        if let Some(dir) = &self.runs_dir {
            if let Err(e) = persist_run(&transcript, dir, &timestamp_now()) {
                tracing::warn!(%e, "could not persist session");
            }
        }
        let status = transcript.status;
        entry.close(Some(transcript), status);
    }
}

#[derive(Deserialize)]
struct StartRequest {
    query: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn created(id: &str, parent: Option<&str>) -> Response {
    (
        StatusCode::CREATED,
        Json(json!({
            "id": id,
            "parent": parent,
            "events": format!("/sessions/{id}/events"),
            "records": format!("/sessions/{id}/records"),
        })),
    )
        .into_response()
}

async fn start_session(State(hub): State<Arc<SessionHub>>, Json(req): Json<StartRequest>) -> Response {
    if req.query.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "query must not be empty");
    }
    let id = hub.start(req.query, None);
    created(&id, None)
}

async fn followup(
    State(hub): State<Arc<SessionHub>>,
    Path(id): Path<String>,
    Json(req): Json<StartRequest>,
) -> Response {
    if req.query.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "query must not be empty");
    }
    let Some(parent) = hub.entry(&id) else {
        return error(StatusCode::NOT_FOUND, format!("no session {id}"));
    };
    let context = {
        let log = parent.log();
        if !log.done {
            return error(StatusCode::CONFLICT, format!("session {id} has not finished"));
        }
        ParentContext {
            session_id: id.clone(),
            user_query: log.transcript.as_ref().map(|t| t.user_query.clone()).unwrap_or_default(),
            dataset: log.transcript.as_ref().map(|t| t.consolidated.clone()).unwrap_or_default(),
        }
    };
    let child = hub.start(req.query, Some(context));
    created(&child, Some(&id))
}

async fn records(State(hub): State<Arc<SessionHub>>, Path(id): Path<String>) -> Response {
    let Some(entry) = hub.entry(&id) else {
        return error(StatusCode::NOT_FOUND, format!("no session {id}"));
    };
    let log = entry.log();
    if !log.done {
        return error(StatusCode::CONFLICT, format!("session {id} has not finished"));
    }
    let body = log
        .transcript
        .as_ref()
        .map(|t| records_to_jsonl(&t.recommendations))
        .unwrap_or_default();
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

async fn transcript(State(hub): State<Arc<SessionHub>>, Path(id): Path<String>) -> Response {
    let Some(entry) = hub.entry(&id) else {
        return error(StatusCode::NOT_FOUND, format!("no session {id}"));
    };
    let log = entry.log();
    match (&log.transcript, log.done) {
        (Some(t), _) => (StatusCode::OK, Json(json!({ "id": id, "parent": entry.parent, "transcript": t }))).into_response(),
        (None, true) => (StatusCode::OK, Json(json!({ "id": id, "parent": entry.parent, "transcript": null }))).into_response(),
        (None, false) => (StatusCode::ACCEPTED, Json(json!({ "id": id, "parent": entry.parent, "status": "running" }))).into_response(),
    }
}

/// Replays the log from `from`, then follows it until the session ends.
fn follow(entry: Arc<SessionEntry>, from: usize) -> impl Stream<Item = (usize, SessionEvent)> {
    let rx = entry.tick.subscribe();
    stream::unfold((entry, rx, from), |(entry, mut rx, next)| async move {
        loop {
            let (batch, done) = {
                let log = entry.log();
                let batch: Vec<(usize, SessionEvent)> = log
                    .events
                    .iter()
                    .enumerate()
                    .skip(next)
                    .map(|(i, e)| (i, e.clone()))
                    .collect();
                (batch, log.done)
            };
            if !batch.is_empty() {
                let next = next + batch.len();
                return Some((stream::iter(batch), (entry, rx, next)));
            }
            if done || rx.changed().await.is_err() {
                return None;
            }
        }
    })
    .flatten()
}

async fn events(State(hub): State<Arc<SessionHub>>, Path(id): Path<String>, headers: HeaderMap) -> Response {
    let Some(entry) = hub.entry(&id) else {
        return error(StatusCode::NOT_FOUND, format!("no session {id}"));
    };
    let from = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<usize>().ok())
        .map_or(0, |seen| seen + 1);
    let stream = follow(entry, from).map(|(seq, e)| {
        let data = serde_json::to_string(&e).unwrap_or_default();
        Ok::<_, Infallible>(Event::default().id(seq.to_string()).event(e.name()).data(data))
    });
    Sse::new(stream).keep_alive(KeepAlive::default()).into_response()
}

pub fn router(hub: Arc<SessionHub>) -> Router {
    Router::new()
        .route("/sessions", post(start_session))
        .route("/sessions/{id}", get(transcript))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/followup", post(followup))
        .route("/sessions/{id}/records", get(records))
        .with_state(hub)
}
