//! Benchmark runner: repeated sessions per backend, scored against the
//! shipped ground truth and folded into one metrics row per backend.

mod benchmark;
mod config;
mod ground_truth;
mod metrics;
mod report;

pub use benchmark::{
    run_benchmark, BackendRuns, BenchBackend, BenchmarkConfig, BenchmarkEnv, BenchmarkError, BenchmarkOutcome,
    RunRecord, ABORT_AFTER_UNAVAILABLE, DEFAULT_N_RUNS,
};
pub use config::{EvalConfig, EvalConfigError};
pub use ground_truth::{oracle_dataset, CanonicalStep, GroundTruth, GroundTruthError, RecordPredicate};
pub use metrics::{
    consolidation_passes, plan_executed, recommendation_passes, score_plan, task_completion_rate,
    tool_recognition_latency, MetricsRow, MetricsTable, PlanScore, RunScore, LOW_N_THRESHOLD,
};
pub use report::{
    parse_csv, render_csv, render_markdown, row_cells, write_report, ReportError, ReportPaths, COLUMNS, CSV_HEADER,
    NEVER,
};
