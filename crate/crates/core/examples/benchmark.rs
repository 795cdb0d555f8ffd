//! Score the three shipped scripts over N runs and print the report table.
//!
//! `cargo run -p finops-agent --example benchmark [n_runs]`

use std::sync::Arc;

use finops_agent::assets;
use finops_agent::eval::{render_markdown, run_benchmark, BenchBackend, BenchmarkConfig, BenchmarkEnv, GroundTruth};
use finops_agent::gateway::LocalGateway;
use finops_agent::llm::{LlmBackend, ScriptedBackend};
use finops_agent::nl2graphql::shipped_bank;

fn scripted(name: &'static str, script: &'static str) -> BenchBackend {
    BenchBackend::new(
        name,
        Arc::new(move || Ok(Box::new(ScriptedBackend::from_json(name, script)?) as Box<dyn LlmBackend>)),
    )
}

fn main() {
    let n_runs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let gw = LocalGateway::shipped();
    let bank = shipped_bank(&gw.schema);
    let gt = GroundTruth::shipped();
    let mut cfg = BenchmarkConfig::new(vec![
        scripted("perfect", assets::SCRIPT_PERFECT),
        scripted("lazy", assets::SCRIPT_LAZY),
        scripted("late_recognition", assets::SCRIPT_LATE_RECOGNITION),
    ]);
    cfg.n_runs = n_runs;
    cfg.parallelism = 4;
    let env = BenchmarkEnv {
        source: &gw,
        bank: &bank,
        ground_truth: &gt,
        clock: None,
    };
    let out = run_benchmark(&cfg, &env).unwrap();
    print!("{}", render_markdown(&out.table));
}
