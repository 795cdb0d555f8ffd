//! Full planning, retrieval, consolidation and analysis run against the
//! shipped fixtures with the scripted "perfect" practitioner.
//!
//! `cargo run -p finops-agent --example golden_session [script.json]`

use finops_agent::agent::{records_to_jsonl, run_session, SessionDeps, SessionEvent};
use finops_agent::assets;
use finops_agent::gateway::LocalGateway;
use finops_agent::llm::ScriptedBackend;
use finops_agent::nl2graphql::shipped_bank;

fn main() {
    let script = match std::env::args().nth(1) {
        Some(p) => std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{p}: {e}")),
        None => assets::SCRIPT_PERFECT.to_string(),
    };
    let gw = LocalGateway::shipped();
    let bank = shipped_bank(&gw.schema);
    let llm = ScriptedBackend::from_json("perfect", &script).unwrap();
    let observer = |ev: &SessionEvent| match ev {
        SessionEvent::StageMarker { stage } => eprintln!("-- {}", stage.as_str()),
        SessionEvent::Iteration { iteration } => eprintln!(
            "   #{} {:?}",
            iteration.index,
            iteration.invocations.iter().map(|i| i.tool.as_str()).collect::<Vec<_>>()
        ),
        _ => {}
    };
    let mut deps = SessionDeps::new(&gw, &llm, &bank);
    deps.observer = Some(&observer);
    match run_session(assets::USE_CASE_QUERY, &deps) {
        Ok(t) => {
            eprintln!("{:?} after {} iterations", t.halt, t.iterations.len());
            print!("{}", records_to_jsonl(&t.recommendations));
        }
        Err(f) => {
            eprintln!("{f}");
            std::process::exit(3);
        }
    }
}
