//! Translate a request into GraphQL with a scripted model whose first answer
//! is rejected and whose second, corrected answer validates.
//!
//! `cargo run -p finops-agent --example translate_query`

use finops_agent::assets;
use finops_agent::llm::ScriptedBackend;
use finops_agent::nl2graphql::{shipped_bank, translate, TranslateOptions};

const REQUEST: &str = "Review pending optimization actions and cost anomalies for OnlineBoutique";

fn main() {
    let schema = assets::unified_schema();
    let bank = shipped_bank(&schema);
    let llm = ScriptedBackend::from_json("two-turn", assets::SCRIPT_TRANSLATE_TWO_TURN).unwrap();
    let result = translate(REQUEST, &schema, &bank, &llm, &TranslateOptions::default()).unwrap();
    for (i, a) in result.attempts.iter().enumerate() {
        println!("attempt {}: valid={}", i + 1, a.report.valid);
        for e in &a.report.errors {
            println!("  {e}");
        }
    }
    println!("attempts_used = {}", result.attempts_used);
    println!("{}", result.final_query);
}
