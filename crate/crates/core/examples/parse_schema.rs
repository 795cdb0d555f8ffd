//! Parse the unified SDL and print the endpoint digest the agents see.
//!
//! `cargo run -p finops-agent --example parse_schema [path/to/schema.graphql]`

use finops_agent::assets;
use finops_agent::schema::{introspect, parse_schema};

fn main() {
    let sdl = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}")),
        None => assets::SCHEMA_SDL.to_string(),
    };
    let schema = match parse_schema(&sdl) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    let digest = introspect(&schema);
    println!("{} endpoints", digest.names().len());
    println!("{}", digest.render());
}
