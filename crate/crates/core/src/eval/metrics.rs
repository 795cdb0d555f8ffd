use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ground_truth::GroundTruth;
use crate::agent::{ExecutionPlan, SessionTranscript};
use crate::schema::CANONICAL_ENDPOINTS;

/// Runs below this count are flagged as low-N in reports.
pub const LOW_N_THRESHOLD: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanScore {
    pub matched: bool,
    pub detail: Vec<String>,
}

/// Matches tool-bound plan steps against the canonical steps by tool name.
/// Steps without a tool are ignored.
pub fn score_plan(plan: &ExecutionPlan, gt: &GroundTruth) -> PlanScore {
    let mut detail = Vec::new();
    let mut mapped: Vec<&str> = Vec::new();
    for step in &plan.steps {
        let Some(tool) = &step.bound_tool else { continue };
        match gt.step_for_tool(tool) {
            Some(s) => mapped.push(&s.id),
            None => detail.push(format!("step {} binds {tool}, which no canonical step uses", step.index)),
        }
    }

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for id in &mapped {
        *counts.entry(id).or_default() += 1;
    }
    for s in &gt.canonical_steps {
        match counts.get(s.id.as_str()).copied().unwrap_or(0) {
            0 => detail.push(format!("absent: {} ({})", s.id, s.tool)),
            1 => {}
            n => detail.push(format!("extra: {} ({}) appears {n} times", s.id, s.tool)),
        }
    }

    let first = |id: &str| mapped.iter().position(|m| *m == id);
    for (a, b) in &gt.precedence {
        if gt.same_group(a, b) {
            continue;
        }
        if let (Some(pa), Some(pb)) = (first(a), first(b)) {
            if pa > pb {
                detail.push(format!(
                    "order: {a} ({}) must come before {b} ({})",
                    gt.tool_of(a).unwrap_or("?"),
                    gt.tool_of(b).unwrap_or("?")
                ));
            }
        }
    }
    PlanScore {
        matched: detail.is_empty(),
        detail,
    }
}

/// First iteration by which every tool has been referenced, or `None`.
pub fn tool_recognition_latency(t: &SessionTranscript) -> Option<usize> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for (i, it) in t.iterations.iter().enumerate() {
        seen.extend(it.tools_referenced.iter().map(String::as_str));
        if CANONICAL_ENDPOINTS.iter().all(|n| seen.contains(n)) {
            return Some(i + 1);
        }
    }
    None
}

/// Distinct tools with a successful invocation, over six.
pub fn task_completion_rate(t: &SessionTranscript) -> f64 {
    let ok = t.successful_tools();
    let n = CANONICAL_ENDPOINTS.iter().filter(|n| ok.contains(**n)).count();
    n as f64 / CANONICAL_ENDPOINTS.len() as f64
}

/// Every tool-bound plan step ran successfully and no invocation failed.
pub fn plan_executed(t: &SessionTranscript) -> bool {
    let Some(plan) = &t.plan else { return false };
    let ok = t.successful_tools();
    let all_bound = plan.bound_tools().iter().all(|tool| ok.contains(*tool));
    let none_failed = t.iterations.iter().flat_map(|i| &i.invocations).all(|inv| inv.ok);
    all_bound && none_failed
}

pub fn consolidation_passes(t: &SessionTranscript, gt: &GroundTruth) -> bool {
    t.consolidated.fingerprint() == gt.oracle_dataset
}

pub fn recommendation_passes(t: &SessionTranscript, gt: &GroundTruth) -> bool {
    let p = gt.record_predicate;
    let valid = t.recommendations.iter().filter(|r| r.is_valid()).count();
    if valid < p.min_valid_records.max(1) || valid != t.recommendations.len() {
        return false;
    }
    if p.require_resolved_refs {
        let seen = t.observed_ids();
        return t
            .recommendations
            .iter()
            .flat_map(|r| &r.source_refs)
            .all(|id| seen.contains(id));
    }
    true
}

/// Per-run verdicts; a row is a fold over these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub wall_time_seconds: f64,
    pub iterations: usize,
    pub planning: bool,
    pub plan_execution: bool,
    pub task_completion: f64,
    pub latency: Option<usize>,
    pub consolidation: bool,
    pub recommendation: bool,
}

impl RunScore {
    pub fn of(t: &SessionTranscript, gt: &GroundTruth) -> Self {
        Self {
            wall_time_seconds: t.wall_time_seconds,
            iterations: t.iterations.len(),
            planning: t.plan.as_ref().is_some_and(|p| score_plan(p, gt).matched),
            plan_execution: plan_executed(t),
            task_completion: task_completion_rate(t),
            latency: tool_recognition_latency(t),
            consolidation: consolidation_passes(t, gt),
            recommendation: recommendation_passes(t, gt),
        }
    }

    /// A run that never produced a transcript.
    pub fn failed() -> Self {
        Self {
            wall_time_seconds: 0.0,
            iterations: 0,
            planning: false,
            plan_execution: false,
            task_completion: 0.0,
            latency: None,
            consolidation: false,
            recommendation: false,
        }
    }

    pub fn passes_all(&self) -> bool {
        self.planning
            && self.plan_execution
            && self.task_completion == 1.0
            && self.consolidation
            && self.recommendation
    }
}

/// One backend's column set. Percentages are in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub backend: String,
    pub execution_time_s: f64,
    pub iterations: f64,
    pub planning_accuracy: f64,
    pub plan_execution_accuracy: f64,
    pub task_completion_rate: f64,
    /// Mean over runs that recognized every tool; `None` renders as "never".
    pub tool_recognition_latency: Option<f64>,
    pub data_consolidation_accuracy: f64,
    pub recommendation_accuracy: f64,
    pub runs: usize,
    pub incomplete: bool,
}

impl MetricsRow {
    pub fn aggregate(backend: &str, scores: &[RunScore], incomplete: bool) -> Self {
        let n = scores.len();
        let mean = |f: &dyn Fn(&RunScore) -> f64| {
            if n == 0 {
                0.0
            } else {
                scores.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let pct = |f: &dyn Fn(&RunScore) -> bool| mean(&|s| if f(s) { 100.0 } else { 0.0 });
        let recognized: Vec<f64> = scores.iter().filter_map(|s| s.latency).map(|l| l as f64).collect();
        Self {
            backend: backend.to_string(),
            execution_time_s: mean(&|s| s.wall_time_seconds),
            iterations: mean(&|s| s.iterations as f64),
            planning_accuracy: pct(&|s| s.planning),
            plan_execution_accuracy: pct(&|s| s.plan_execution),
            task_completion_rate: mean(&|s| s.task_completion * 100.0),
            tool_recognition_latency: (!recognized.is_empty())
                .then(|| recognized.iter().sum::<f64>() / recognized.len() as f64),
            data_consolidation_accuracy: pct(&|s| s.consolidation),
            recommendation_accuracy: pct(&|s| s.recommendation),
            runs: n,
            incomplete,
        }
    }

    pub fn low_n(&self) -> bool {
        self.runs < LOW_N_THRESHOLD
    }

    pub fn percentages(&self) -> [f64; 5] {
        [
            self.planning_accuracy,
            self.plan_execution_accuracy,
            self.task_completion_rate,
            self.data_consolidation_accuracy,
            self.recommendation_accuracy,
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn row(&self, backend: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.backend == backend)
    }

    pub fn any_incomplete(&self) -> bool {
        self.rows.iter().any(|r| r.incomplete)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::PlanStep;
    use proptest::prelude::*;

    fn plan_of(tools: &[Option<&str>]) -> ExecutionPlan {
        ExecutionPlan {
            steps: tools
                .iter()
                .enumerate()
                .map(|(i, t)| PlanStep {
                    index: i + 1,
                    description: t.unwrap_or("summarize").to_string(),
                    bound_tool: t.map(str::to_string),
                    depends_on: if i == 0 { vec![] } else { vec![i] },
                })
                .collect(),
        }
    }

    const ORDERED: [&str; 6] = [
        "get_applications_names",
        "get_entities",
        "get_actions",
        "get_spending_anomaly_events",
        "get_commitment_recommendations",
        "get_rightsizing_recommendations",
    ];

    #[test]
    fn ground_truth_order_matches() {
        let gt = GroundTruth::shipped();
        let mut tools: Vec<Option<&str>> = ORDERED.iter().copied().map(Some).collect();
        tools.extend([None, None]);
        let s = score_plan(&plan_of(&tools), &gt);
        assert!(s.matched, "{:?}", s.detail);
    }

    /// Every permutation of the last three steps keeps get_actions ahead of
    /// them, so each one must match.
    #[test]
    fn interchange_group_permutations_match() {
        let gt = GroundTruth::shipped();
        let tail = &ORDERED[3..];
        for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let mut tools: Vec<Option<&str>> = ORDERED[..3].iter().copied().map(Some).collect();
            tools.extend(perm.iter().map(|i| Some(tail[*i])));
            assert!(score_plan(&plan_of(&tools), &gt).matched, "{perm:?}");
        }
    }

    #[test]
    fn missing_and_misordered_steps() {
        let gt = GroundTruth::shipped();
        let tools: Vec<Option<&str>> = ORDERED
            .iter()
            .copied()
            .filter(|t| *t != "get_commitment_recommendations")
            .map(Some)
            .collect();
        let s = score_plan(&plan_of(&tools), &gt);
        assert!(!s.matched);
        assert_eq!(s.detail, vec!["absent: S5 (get_commitment_recommendations)"]);

        let mut tools: Vec<Option<&str>> = ORDERED.iter().copied().map(Some).collect();
        tools.swap(2, 3);
        let s = score_plan(&plan_of(&tools), &gt);
        assert_eq!(
            s.detail,
            vec!["order: S3 (get_actions) must come before S4 (get_spending_anomaly_events)"]
        );

        let mut tools: Vec<Option<&str>> = ORDERED.iter().copied().map(Some).collect();
        tools.insert(2, Some("get_entities"));
        let s = score_plan(&plan_of(&tools), &gt);
        assert_eq!(s.detail, vec!["extra: S2 (get_entities) appears 2 times"]);
    }

    fn score(pass: bool) -> RunScore {
        RunScore {
            wall_time_seconds: 90.0,
            iterations: 6,
            planning: pass,
            plan_execution: pass,
            task_completion: if pass { 1.0 } else { 0.5 },
            latency: pass.then_some(1),
            consolidation: pass,
            recommendation: pass,
        }
    }

    #[test]
    fn aggregation_arithmetic() {
        let mut scores: Vec<RunScore> = (0..7).map(|_| score(true)).collect();
        scores.extend((0..3).map(|_| score(false)));
        let row = MetricsRow::aggregate("m", &scores, false);
        assert_eq!(row.plan_execution_accuracy, 70.0);
        assert_eq!(row.task_completion_rate, 85.0);
        assert_eq!(row.tool_recognition_latency, Some(1.0));
        assert_eq!(row.runs, 10);
        assert!(!row.low_n());

        let row = MetricsRow::aggregate("m", &[score(false)], false);
        assert_eq!(row.tool_recognition_latency, None);
        assert!(row.low_n());

        let empty = MetricsRow::aggregate("m", &[], true);
        assert_eq!(empty.planning_accuracy, 0.0);
        assert!(empty.incomplete);
    }

    fn arb_score() -> impl Strategy<Value = RunScore> {
        (
            any::<bool>(),
            any::<bool>(),
            0usize..=6,
            proptest::option::of(1usize..30),
            any::<bool>(),
            any::<bool>(),
        )
            .prop_map(|(p, e, done, latency, c, r)| RunScore {
                wall_time_seconds: 1.0,
                iterations: 6,
                planning: p,
                plan_execution: e,
                task_completion: done as f64 / 6.0,
                latency,
                consolidation: c,
                recommendation: r,
            })
    }

    fn passing() -> RunScore {
        RunScore {
            task_completion: 1.0,
            ..score(true)
        }
    }

    fn failing() -> RunScore {
        RunScore {
            task_completion: 0.0,
            ..score(false)
        }
    }

    proptest! {
        #[test]
        fn adding_runs_moves_percentages_the_right_way(scores in proptest::collection::vec(arb_score(), 1..20)) {
            let base = MetricsRow::aggregate("m", &scores, false).percentages();
            let mut up = scores.clone();
            up.push(passing());
            let mut down = scores.clone();
            down.push(failing());
            let up = MetricsRow::aggregate("m", &up, false).percentages();
            let down = MetricsRow::aggregate("m", &down, false).percentages();
            for i in 0..base.len() {
                prop_assert!(up[i] >= base[i] - 1e-9);
                prop_assert!(down[i] <= base[i] + 1e-9);
                prop_assert!((0.0..=100.0).contains(&up[i]) && (0.0..=100.0).contains(&down[i]));
            }
        }
    }
}
