//! Run one query that spans both vendors and print data plus provenance.
//!
//! `cargo run -p finops-agent --example federated_query [query text]`

use finops_agent::assets;
use finops_agent::gateway::{DataSource, LocalGateway};

fn main() {
    let query = std::env::args()
        .nth(1)
        .unwrap_or_else(|| assets::REVIEW_OPTIMIZATION_QUERY.to_string());
    let gw = LocalGateway::shipped();
    let result = gw.run(&query);
    println!("{}", serde_json::to_string_pretty(&result).unwrap());
    for (key, p) in &result.provenance {
        println!("{key} <- {:?} {}", p.vendor, p.operation);
    }
    if !result.errors.is_empty() {
        std::process::exit(1);
    }
}
