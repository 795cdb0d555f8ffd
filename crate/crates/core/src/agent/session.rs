use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::consolidate::{consolidate, ConsolidatedDataset, ToolObservation};
use super::planner::{plan, ExecutionPlan};
use super::react::{parse_react, tools_referenced, AgentAction, GRAPHQL_ACTION, NL2GRAPHQL_ACTION};
use super::recommend::{recommend, Constraints, RecommendationRecord};
use super::tools::{invoke_tool, synthesize_query, Observation, ToolRegistry};
use super::AgentError;
use crate::gateway::{DataSource, ResultDocument};
use crate::llm::{ChatMessage, CompletionParams, LlmBackend};
use crate::nl2graphql::{translate, Exemplar, TranslateError, TranslateOptions};
use crate::schema::{parse_query, QueryDocument};

pub const DEFAULT_MAX_ITERATIONS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    InstructionReview,
    Plan,
    Retrieval,
    Consolidation,
    Recommendation,
}

impl Stage {
    pub const ORDER: [Stage; 5] = [
        Stage::InstructionReview,
        Stage::Plan,
        Stage::Retrieval,
        Stage::Consolidation,
        Stage::Recommendation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::InstructionReview => "instruction_review",
            Stage::Plan => "plan",
            Stage::Retrieval => "retrieval",
            Stage::Consolidation => "consolidation",
            Stage::Recommendation => "recommendation",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a tool call reached the gateway.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "path", rename_all = "snake_case")]
pub enum Dispatch {
    Direct,
    Translated { attempts_used: usize },
    Raw,
}

/// One endpoint executed within an iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub tool: String,
    /// Response key under which the result sits in the observation payload.
    pub key: String,
    #[serde(default)]
    pub args: Map<String, Value>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactIteration {
    pub index: usize,
    pub thought: String,
    pub action: AgentAction,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dispatch: Option<Dispatch>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub query: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub observation: Option<Observation>,
    #[serde(default)]
    pub invocations: Vec<Invocation>,
    pub tools_referenced: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    Finish,
    PlanComplete,
    IterationCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    Completed,
    IterationCapExceeded,
    LlmUnavailable,
    UnparseablePlan,
    NoRecommendations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub parent_session: Option<String>,
    pub user_query: String,
    pub model: String,
    pub status: SessionStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub stage_markers: Vec<Stage>,
    pub instruction_review: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub plan: Option<ExecutionPlan>,
    pub plan_text: String,
    pub iterations: Vec<ReactIteration>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub halt: Option<HaltReason>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_answer: Option<String>,
    pub consolidated: ConsolidatedDataset,
    pub recommendations: Vec<RecommendationRecord>,
    pub dropped_records: Vec<String>,
    pub wall_time_seconds: f64,
}

impl SessionTranscript {
    fn new(user_query: &str, model: &str) -> Self {
        Self {
            parent_session: None,
            user_query: user_query.to_string(),
            model: model.to_string(),
            status: SessionStatus::Running,
            error: None,
            stage_markers: Vec::new(),
            instruction_review: String::new(),
            plan: None,
            plan_text: String::new(),
            iterations: Vec::new(),
            halt: None,
            final_answer: None,
            consolidated: ConsolidatedDataset::default(),
            recommendations: Vec::new(),
            dropped_records: Vec::new(),
            wall_time_seconds: 0.0,
        }
    }

    pub fn completed(&self) -> bool {
        self.status == SessionStatus::Completed
    }

    /// Canonical tools with at least one successful invocation.
    pub fn successful_tools(&self) -> BTreeSet<String> {
        self.iterations
            .iter()
            .flat_map(|it| &it.invocations)
            .filter(|inv| inv.ok)
            .map(|inv| inv.tool.clone())
            .collect()
    }

    /// Successful results in iteration order, ready for consolidation.
    pub fn observations(&self) -> Vec<ToolObservation> {
        let mut out = Vec::new();
        for it in &self.iterations {
            let Some(Observation::Data { payload, .. }) = &it.observation else {
                continue;
            };
            for inv in it.invocations.iter().filter(|i| i.ok) {
                if let Some(value) = payload.get(&inv.key) {
                    out.push(ToolObservation {
                        iteration: it.index,
                        tool: inv.tool.clone(),
                        args: inv.args.clone(),
                        value: value.clone(),
                    });
                }
            }
        }
        out
    }

    /// Every record id seen in any observation.
    pub fn observed_ids(&self) -> BTreeSet<String> {
        consolidate(&self.observations()).ids()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }
}

/// Streamed while a session runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    StageMarker { stage: Stage },
    Plan { plan: ExecutionPlan },
    Iteration { iteration: ReactIteration },
    Record { record: RecommendationRecord },
    Error { message: String },
    Done { status: SessionStatus },
}

impl SessionEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SessionEvent::StageMarker { .. } => "stage_marker",
            SessionEvent::Plan { .. } => "plan",
            SessionEvent::Iteration { .. } => "iteration",
            SessionEvent::Record { .. } => "record",
            SessionEvent::Error { .. } => "error",
            SessionEvent::Done { .. } => "done",
        }
    }
}

pub trait SessionObserver: Send + Sync {
    fn on_event(&self, event: &SessionEvent);
}

impl<F: Fn(&SessionEvent) + Send + Sync> SessionObserver for F {
    fn on_event(&self, event: &SessionEvent) {
        self(event)
    }
}

/// Source of elapsed time; a frozen clock makes transcripts reproducible.
pub trait Clock: Send + Sync {
    /// Seconds on an arbitrary monotonic scale.
    fn now(&self) -> f64;
}

pub struct SystemClock(Instant);

impl SystemClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_iterations: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// What a follow-up session inherits from its parent.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentContext {
    pub session_id: String,
    pub user_query: String,
    pub dataset: ConsolidatedDataset,
}

impl ParentContext {
    fn render(&self) -> String {
        let mut out = format!("Previous request: {}\n", self.user_query);
        for view in self.dataset.applications.values() {
            let ids: Vec<String> = view
                .actions
                .iter()
                .chain(&view.anomalies)
                .chain(&view.rightsizings)
                .filter_map(|r| r.fields.get("id").and_then(Value::as_str).map(String::from))
                .collect();
            out.push_str(&format!(
                "- {}: {} entities; records {}\n",
                view.application,
                view.entities.len(),
                if ids.is_empty() { "none".into() } else { ids.join(", ") }
            ));
        }
        let cr: Vec<&str> = self
            .dataset
            .commitments
            .iter()
            .filter_map(|r| r.fields.get("id").and_then(Value::as_str))
            .collect();
        if !cr.is_empty() {
            out.push_str(&format!("- commitments: {}\n", cr.join(", ")));
        }
        out
    }
}

pub struct SessionDeps<'a> {
    pub source: &'a dyn DataSource,
    pub llm: &'a dyn LlmBackend,
    pub bank: &'a [Exemplar],
    pub limits: Limits,
    pub constraints: Constraints,
    pub params: CompletionParams,
    pub translate: TranslateOptions,
    /// Defaults to wall-clock time.
    pub clock: Option<&'a dyn Clock>,
    pub observer: Option<&'a dyn SessionObserver>,
    pub parent: Option<ParentContext>,
}

impl<'a> SessionDeps<'a> {
    pub fn new(source: &'a dyn DataSource, llm: &'a dyn LlmBackend, bank: &'a [Exemplar]) -> Self {
        Self {
            source,
            llm,
            bank,
            limits: Limits::default(),
            constraints: Constraints::default(),
            params: CompletionParams::default(),
            translate: TranslateOptions::default(),
            clock: None,
            observer: None,
            parent: None,
        }
    }
}

/// A session that stopped early. The partial transcript is kept.
#[derive(Debug)]
pub struct SessionFailure {
    pub error: AgentError,
    pub transcript: Box<SessionTranscript>,
}

impl fmt::Display for SessionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for SessionFailure {}

pub const RETRIEVAL_RULES: &str = "You are the Data Retrieval Agent of a FinOps assistant.\n\
Work through the plan one tool call per turn. Reply in exactly this format:\n\
Thought: <your reasoning>\n\
Action: <tool name, nl2graphql, graphql or Finish>\n\
Action Input: <JSON object of tool arguments, a request or query text, or a final note>\n\
Use nl2graphql with a plain-language request when no single tool fits, graphql to send a query yourself, \
and Finish once every plan step has its data.";

fn iteration_prompt(i: usize) -> String {
    format!("Iteration {i}: respond with Thought, Action and Action Input.")
}

struct Runner<'d, 'a> {
    deps: &'d SessionDeps<'a>,
    registry: ToolRegistry,
    t: SessionTranscript,
    started: f64,
    wall: Instant,
}

impl Runner<'_, '_> {
    fn emit(&self, event: SessionEvent) {
        if let Some(o) = self.deps.observer {
            o.on_event(&event);
        }
    }

    fn stage(&mut self, stage: Stage) {
        self.t.stage_markers.push(stage);
        self.emit(SessionEvent::StageMarker { stage });
    }

    fn elapsed(&self) -> f64 {
        match self.deps.clock {
            Some(c) => (c.now() - self.started).max(0.0),
            None => self.wall.elapsed().as_secs_f64(),
        }
    }

    fn finish(mut self, status: SessionStatus, error: Option<AgentError>) -> Result<SessionTranscript, SessionFailure> {
        self.t.status = status;
        self.t.wall_time_seconds = self.elapsed();
        if let Some(e) = &error {
            self.t.error = Some(e.to_string());
            self.emit(SessionEvent::Error { message: e.to_string() });
        }
        self.emit(SessionEvent::Done { status });
        match error {
            None => Ok(self.t),
            Some(error) => Err(SessionFailure {
                error,
                transcript: Box::new(self.t),
            }),
        }
    }

    fn execute(&self, doc: &QueryDocument) -> (ResultDocument, Vec<Invocation>) {
        let result = self.deps.source.execute(doc);
        let schema = self.deps.source.schema();
        let invocations = doc
            .selections
            .iter()
            .map(|sel| {
                let key = sel.response_key().to_string();
                let tool = schema
                    .resolve_endpoint(&sel.name)
                    .map(|(ep, _)| ep.name.clone())
                    .unwrap_or_else(|| sel.name.clone());
                let ok = result.errors_at(&key).is_empty()
                    && result.data.as_ref().and_then(|d| d.get(&key)).is_some_and(|v| !v.is_null());
                let args = sel.arguments.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
                Invocation { tool, key, args, ok }
            })
            .collect();
        (result, invocations)
    }

    fn observation_of(result: ResultDocument) -> Observation {
        let errors: Vec<String> = result.errors.iter().map(|e| e.message.clone()).collect();
        match result.data {
            Some(payload) if payload.values().any(|v| !v.is_null()) => Observation::Data { payload, errors },
            _ => Observation::Error {
                message: errors.join("; "),
            },
        }
    }

    /// Runs the action of one iteration, filling dispatch, query,
    /// observation and invocations.
    fn act(&self, it: &mut ReactIteration) -> Result<(), AgentError> {
        let (name, args) = match &it.action {
            AgentAction::Finish { .. } => return Ok(()),
            AgentAction::Unparsed { reason } => {
                it.observation = Some(Observation::Error {
                    message: format!("could not parse an action ({reason}); reply with Thought, Action and Action Input lines"),
                });
                return Ok(());
            }
            AgentAction::ToolCall { name, args } => (name.clone(), args.clone()),
        };
        let schema = self.deps.source.schema();
        match name.as_str() {
            NL2GRAPHQL_ACTION => {
                let request = match &args {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                match translate(&request, schema, self.deps.bank, self.deps.llm, &self.deps.translate) {
                    Ok(tr) => {
                        let (result, invocations) = self.execute(&tr.final_query);
                        it.dispatch = Some(Dispatch::Translated {
                            attempts_used: tr.attempts_used,
                        });
                        it.query = Some(tr.final_text().to_string());
                        it.observation = Some(Self::observation_of(result));
                        it.invocations = invocations;
                    }
                    Err(TranslateError::Llm(e)) => return Err(e.into()),
                    Err(e) => {
                        let mut message = e.to_string();
                        let mut used = 0;
                        if let TranslateError::TranslationExhausted { attempts } = &e {
                            used = attempts.len();
                            if let Some(last) = attempts.last() {
                                it.query = Some(last.query_text.clone());
                                message = format!("{message}\n{}", last.report.feedback());
                            }
                        }
                        it.dispatch = Some(Dispatch::Translated { attempts_used: used });
                        it.observation = Some(Observation::Error { message });
                    }
                }
            }
            GRAPHQL_ACTION => {
                let text = match &args {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                it.dispatch = Some(Dispatch::Raw);
                it.query = Some(text.clone());
                match parse_query(&text) {
                    Ok(doc) => {
                        let (result, invocations) = self.execute(&doc);
                        it.observation = Some(Self::observation_of(result));
                        it.invocations = invocations;
                    }
                    Err(e) => it.observation = Some(Observation::Error { message: e.to_string() }),
                }
            }
            _ => {
                let (tool, obs) = invoke_tool(&self.registry, self.deps.source, &name, &args);
                let arg_map = args.as_object().cloned().unwrap_or_default();
                it.dispatch = Some(Dispatch::Direct);
                it.query = synthesize_query(schema, &tool, &arg_map).ok().map(|d| d.to_string());
                it.invocations = vec![Invocation {
                    ok: !obs.is_error(),
                    key: tool.clone(),
                    tool,
                    args: arg_map,
                }];
                it.observation = Some(obs);
            }
        }
        Ok(())
    }

    fn plan_complete(&self) -> bool {
        let Some(plan) = &self.t.plan else { return false };
        let done = self.t.successful_tools();
        let needed = plan.bound_tools();
        !needed.is_empty() && needed.iter().all(|t| done.contains(*t))
    }

    fn retrieval(&mut self) -> Result<(), AgentError> {
        let mut system = format!(
            "{RETRIEVAL_RULES}\n\nAvailable tools:\n{}\nPlan:\n{}\n",
            self.registry.digest(),
            self.t.plan.as_ref().map(ExecutionPlan::render).unwrap_or_default()
        );
        if let Some(p) = &self.deps.parent {
            system.push_str("\nContext from the previous session:\n");
            system.push_str(&p.render());
        }
        let mut messages = vec![
            ChatMessage::system(system),
            ChatMessage::user(format!("Request: {}\n{}", self.t.user_query, iteration_prompt(1))),
        ];
        let schema = self.deps.source.schema();
        for index in 1..=self.deps.limits.max_iterations {
            let completion = self.deps.llm.complete(&messages, &self.deps.params)?;
            let step = parse_react(&completion);
            let action_text = match &step.action {
                AgentAction::ToolCall { name, args } => format!("{name} {args}"),
                AgentAction::Finish { .. } => String::new(),
                AgentAction::Unparsed { .. } => String::new(),
            };
            let mut it = ReactIteration {
                index,
                tools_referenced: tools_referenced(&format!("{}\n{action_text}", step.thought), schema),
                thought: step.thought,
                action: step.action,
                dispatch: None,
                query: None,
                observation: None,
                invocations: Vec::new(),
            };
            self.act(&mut it)?;
            let finish = match &it.action {
                AgentAction::Finish { answer } => Some(answer.clone()),
                _ => None,
            };
            let obs_text = it.observation.as_ref().map(Observation::render).unwrap_or_default();
            self.emit(SessionEvent::Iteration { iteration: it.clone() });
            self.t.iterations.push(it);
            if let Some(answer) = finish {
                self.t.final_answer = Some(answer);
                self.t.halt = Some(HaltReason::Finish);
                return Ok(());
            }
            if self.plan_complete() {
                self.t.halt = Some(HaltReason::PlanComplete);
                return Ok(());
            }
            messages.push(ChatMessage::assistant(completion));
            messages.push(ChatMessage::user(format!(
                "Observation: {obs_text}\n{}",
                iteration_prompt(index + 1)
            )));
        }
        self.t.halt = Some(HaltReason::IterationCap);
        Err(AgentError::IterationCapExceeded(self.deps.limits.max_iterations))
    }
}

fn status_of(e: &AgentError) -> SessionStatus {
    match e {
        AgentError::IterationCapExceeded(_) => SessionStatus::IterationCapExceeded,
        AgentError::UnparseablePlan(_) => SessionStatus::UnparseablePlan,
        AgentError::NoRecommendations { .. } => SessionStatus::NoRecommendations,
        _ => SessionStatus::LlmUnavailable,
    }
}

/// Runs the five stages in order: instruction review, plan, retrieval,
/// consolidation, recommendation.
pub fn run_session(user_query: &str, deps: &SessionDeps<'_>) -> Result<SessionTranscript, SessionFailure> {
    let mut t = SessionTranscript::new(user_query, deps.llm.name());
    t.parent_session = deps.parent.as_ref().map(|p| p.session_id.clone());
    let registry = match ToolRegistry::from_schema(deps.source.schema()) {
        Ok(r) => r,
        Err(error) => {
            t.status = SessionStatus::LlmUnavailable;
            t.error = Some(error.to_string());
            return Err(SessionFailure {
                error,
                transcript: Box::new(t),
            });
        }
    };
    let mut r = Runner {
        deps,
        registry,
        t,
        started: deps.clock.map(|c| c.now()).unwrap_or(0.0),
        wall: Instant::now(),
    };

    r.stage(Stage::InstructionReview);
    r.t.instruction_review = format!(
        "Request: {user_query}\nTools ({}):\n{}",
        r.registry.tools().len(),
        r.registry.digest()
    );

    r.stage(Stage::Plan);
    let context = deps.parent.as_ref().map(ParentContext::render);
    match plan(user_query, &r.registry, deps.llm, &deps.params, context.as_deref()) {
        Ok((p, raw)) => {
            r.t.plan_text = raw;
            r.emit(SessionEvent::Plan { plan: p.clone() });
            r.t.plan = Some(p);
        }
        Err(e) => {
            let s = status_of(&e);
            return r.finish(s, Some(e));
        }
    }

    r.stage(Stage::Retrieval);
    if let Err(e) = r.retrieval() {
        let s = status_of(&e);
        return r.finish(s, Some(e));
    }

    r.stage(Stage::Consolidation);
    r.t.consolidated = consolidate(&r.t.observations());

    r.stage(Stage::Recommendation);
    match recommend(user_query, &r.t.consolidated, &deps.constraints, deps.llm, &deps.params) {
        Ok(out) => {
            for rec in &out.records {
                r.emit(SessionEvent::Record { record: rec.clone() });
            }
            r.t.recommendations = out.records;
            r.t.dropped_records = out.dropped;
            r.finish(SessionStatus::Completed, None)
        }
        Err(e) => {
            if let AgentError::NoRecommendations { dropped } = &e {
                r.t.dropped_records = dropped.clone();
            }
            let s = status_of(&e);
            r.finish(s, Some(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::gateway::LocalGateway;
    use crate::llm::ScriptedBackend;
    use crate::nl2graphql::shipped_bank;
    use std::sync::Mutex;

    fn run(script: &str, name: &str, limits: Limits) -> Result<SessionTranscript, SessionFailure> {
        let gw = LocalGateway::shipped();
        let bank = shipped_bank(&gw.schema);
        let llm = ScriptedBackend::from_json(name, script).unwrap();
        let mut deps = SessionDeps::new(&gw, &llm, &bank);
        deps.limits = limits;
        deps.clock = Some(&FrozenClock);
        run_session(assets::USE_CASE_QUERY, &deps)
    }

    #[test]
    fn golden_session() {
        let t = run(assets::SCRIPT_PERFECT, "perfect", Limits::default()).unwrap();
        assert_eq!(t.stage_markers, Stage::ORDER.to_vec());
        assert_eq!(t.successful_tools().len(), 6);
        assert_eq!(t.halt, Some(HaltReason::PlanComplete));
        assert_eq!(t.recommendations.len(), 3);
        let total: f64 = t.recommendations.iter().map(|r| r.estimated_savings).sum();
        assert_eq!(total, 5620.0);
        let seen = t.observed_ids();
        assert!(t
            .recommendations
            .iter()
            .flat_map(|r| &r.source_refs)
            .all(|id| seen.contains(id)));
        assert!(t.iterations.iter().all(|i| i.observation.is_some()));
        assert_eq!(t.wall_time_seconds, 0.0);
    }

    #[test]
    fn repeated_runs_are_byte_identical() {
        let a = run(assets::SCRIPT_PERFECT, "perfect", Limits::default()).unwrap().to_json_pretty();
        let b = run(assets::SCRIPT_PERFECT, "perfect", Limits::default()).unwrap().to_json_pretty();
        assert_eq!(a, b);
    }

    #[test]
    fn silent_model_hits_the_cap() {
        let f = run(assets::SCRIPT_NO_TOOLS, "no_tools", Limits::default()).unwrap_err();
        assert!(matches!(f.error, AgentError::IterationCapExceeded(25)));
        assert_eq!(f.transcript.status, SessionStatus::IterationCapExceeded);
        assert_eq!(f.transcript.iterations.len(), 25);
        assert!(f.transcript.successful_tools().is_empty());
        assert_eq!(f.transcript.halt, Some(HaltReason::IterationCap));

        let f = run(assets::SCRIPT_NO_TOOLS, "no_tools", Limits { max_iterations: 2 }).unwrap_err();
        assert_eq!(f.transcript.iterations.len(), 2);
    }

    #[test]
    fn llm_failure_keeps_the_partial_transcript() {
        let mut entries: Vec<Value> = serde_json::from_str(assets::SCRIPT_PERFECT).unwrap();
        entries.truncate(3);
        let script = Value::Array(entries).to_string();
        let f = run(&script, "short", Limits::default()).unwrap_err();
        assert!(matches!(f.error, AgentError::Llm(_)));
        assert_eq!(f.transcript.status, SessionStatus::LlmUnavailable);
        assert_eq!(f.transcript.stage_markers, vec![Stage::InstructionReview, Stage::Plan, Stage::Retrieval]);
        assert!(f.transcript.plan.is_some());
    }

    #[test]
    fn events_arrive_in_stage_order() {
        let gw = LocalGateway::shipped();
        let bank = shipped_bank(&gw.schema);
        let llm = ScriptedBackend::from_json("perfect", assets::SCRIPT_PERFECT).unwrap();
        let seen = Mutex::new(Vec::new());
        let obs = |e: &SessionEvent| seen.lock().unwrap().push(e.clone());
        let mut deps = SessionDeps::new(&gw, &llm, &bank);
        deps.observer = Some(&obs);
        let t = run_session(assets::USE_CASE_QUERY, &deps).unwrap();
        let events = seen.into_inner().unwrap();
        let stages: Vec<Stage> = events
            .iter()
            .filter_map(|e| match e {
                SessionEvent::StageMarker { stage } => Some(*stage),
                _ => None,
            })
            .collect();
        assert_eq!(stages, Stage::ORDER.to_vec());
        let iterations = events.iter().filter(|e| e.name() == "iteration").count();
        assert_eq!(iterations, t.iterations.len());
        assert_eq!(events.iter().filter(|e| e.name() == "record").count(), 3);
        assert_eq!(
            events.last(),
            Some(&SessionEvent::Done {
                status: SessionStatus::Completed
            })
        );
        assert!(t.wall_time_seconds >= 0.0);
    }

    #[test]
    fn translated_and_raw_paths_are_recorded() {
        let script = serde_json::json!([
            {"match": "Plan request", "response": "1. Call get_spending_anomaly_events for OnlineBoutique.\n2. Call get_commitment_recommendations."},
            {"match": "Iteration 1:", "response": "Thought: anomalies first\nAction: nl2graphql\nAction Input: spending anomalies for OnlineBoutique"},
            {"response": "```graphql\nquery { get_spending_anomaly_events(app_name: \"OnlineBoutique\") { id application anomalyValue } }\n```"},
            {"match": "Iteration 2:", "response": "Thought: now commitments\nAction: graphql\nAction Input: { apptioGetCommitmentRecommendations { id potentialSavings } }"},
            {"match": "Consolidated dataset", "response": "[{\"short_description\": \"Buy savings plan\", \"description\": \"Raise coverage\", \"category\": \"commitment\", \"application\": \"shared\", \"estimated_savings\": 5400, \"priority\": \"high\", \"source_refs\": [\"CR-1\"]}]"}
        ]);
        let t = run(&script.to_string(), "mixed", Limits::default()).unwrap();
        assert_eq!(t.iterations[0].dispatch, Some(Dispatch::Translated { attempts_used: 1 }));
        assert_eq!(t.iterations[1].dispatch, Some(Dispatch::Raw));
        assert_eq!(t.iterations[1].invocations[0].tool, "get_commitment_recommendations");
        assert_eq!(t.halt, Some(HaltReason::PlanComplete));
        assert_eq!(t.consolidated.applications["onlineboutique"].anomalies.len(), 1);
        assert_eq!(t.recommendations.len(), 1);
    }
}
