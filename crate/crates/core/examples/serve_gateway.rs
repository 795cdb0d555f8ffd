//! Serve the gateway and session API on an ephemeral port, drive one
//! session over HTTP, print its event stream and records, then shut down.
//!
//! `cargo run -p finops-agent --example serve_gateway`

use std::sync::Arc;

use finops_agent::agent::api::{self, SessionHub};
use finops_agent::assets;
use finops_agent::gateway::server::{self, GatewayState};
use finops_agent::gateway::LocalGateway;
use finops_agent::llm::{LlmBackend, ScriptedBackend};
use finops_agent::nl2graphql::shipped_bank;
use serde_json::{json, Value};

#[tokio::main]
async fn main() {
    let gw = LocalGateway::shipped();
    let bank = shipped_bank(&gw.schema);
    let hub = SessionHub::new(
        Arc::new(gw.clone()),
        bank,
        Arc::new(|| Ok(Box::new(ScriptedBackend::from_json("perfect", assets::SCRIPT_PERFECT)?) as Box<dyn LlmBackend>)),
    );
    let app = server::router(GatewayState::ready(gw)).merge(api::router(Arc::new(hub)));

    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let (bound_tx, bound_rx) = tokio::sync::oneshot::channel();
    let handle = tokio::spawn(async move {
        server::serve_router(
            "127.0.0.1:0",
            app,
            async {
                let _ = stopped.await;
            },
            |a| {
                let _ = bound_tx.send(a);
            },
        )
        .await
    });
    let base = format!("http://{}", bound_rx.await.unwrap());
    println!("listening on {base}");

    let client = reqwest::Client::new();
    let started: Value = client
        .post(format!("{base}/sessions"))
        .json(&json!({ "query": assets::USE_CASE_QUERY }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let id = started["id"].as_str().unwrap();
    println!("session {id}");

    let events = client.get(format!("{base}{}", started["events"].as_str().unwrap())).send().await.unwrap();
    for line in events.text().await.unwrap().lines().filter(|l| l.starts_with("event:")) {
        println!("  {line}");
    }
    let records = client.get(format!("{base}/sessions/{id}/records")).send().await.unwrap();
    print!("{}", records.text().await.unwrap());

    let _ = stop.send(());
    handle.await.unwrap().unwrap();
}
