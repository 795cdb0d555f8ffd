//! Validate the federated anomaly + action query three ways: verbatim,
//! reconciled to the schema, and with the alias table removed.
//!
//! `cargo run -p finops-agent --example validate_federated_sample`

use finops_agent::assets;
use finops_agent::schema::{parse_query, validate_query, UnifiedSchema};

fn show(label: &str, text: &str, schema: &UnifiedSchema) {
    let report = validate_query(&parse_query(text).expect("query parses"), schema);
    println!("{label}: valid={} aliases={:?}", report.valid, report.resolved_aliases);
    for e in &report.errors {
        println!("  {e}");
    }
}

fn main() {
    let schema = assets::unified_schema();
    show("verbatim", assets::FEDERATED_SAMPLE_QUERY, &schema);
    show("reconciled", assets::REVIEW_OPTIMIZATION_QUERY, &schema);
    show("no alias table", assets::REVIEW_OPTIMIZATION_QUERY, &schema.without_aliases());
}
