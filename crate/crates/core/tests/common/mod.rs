//! Brute-force answers computed straight from the fixture files.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde_json::{Map, Value};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(repo_root().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub struct Fixtures {
    pub turbo: Value,
    pub apptio: Value,
}

impl Fixtures {
    pub fn load() -> Self {
        Self {
            turbo: serde_json::from_str(&read("fixtures/v1/turbonomic.json")).unwrap(),
            apptio: serde_json::from_str(&read("fixtures/v1/apptio.json")).unwrap(),
        }
    }

    pub fn applications(&self) -> Vec<String> {
        self.turbo["applications"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap().to_string())
            .collect()
    }

    fn owner(&self, entity: &str) -> Option<String> {
        self.turbo["entities"].as_object().unwrap().iter().find_map(|(app, list)| {
            list.as_array()
                .unwrap()
                .iter()
                .any(|e| e["name"] == entity)
                .then(|| app.clone())
        })
    }

    fn rows(v: &Value) -> Vec<Map<String, Value>> {
        v.as_array().unwrap().iter().map(|r| r.as_object().unwrap().clone()).collect()
    }

    fn rename(mut row: Map<String, Value>, from: &str, to: &str) -> Map<String, Value> {
        if let Some(v) = row.remove(from) {
            row.insert(to.into(), v);
        }
        row
    }

    /// Rows an endpoint should return for `args`, in unified field names.
    pub fn expected(&self, endpoint: &str, args: &[(&str, &str)]) -> Vec<Map<String, Value>> {
        let arg = |k: &str| args.iter().find(|(n, _)| *n == k).map(|(_, v)| *v);
        match endpoint {
            "get_entities" => {
                let app = arg("application_name").unwrap();
                Self::rows(&self.turbo["entities"][app])
            }
            "get_actions" => Self::rows(&self.turbo["actions"])
                .into_iter()
                .filter(|a| {
                    let target = a["target"].as_str().unwrap();
                    match (arg("entity_name"), arg("app_name")) {
                        (Some(e), _) => target == e,
                        (None, Some(app)) => self.owner(target).as_deref() == Some(app),
                        (None, None) => true,
                    }
                })
                .collect(),
            "get_spending_anomaly_events" => Self::rows(&self.apptio["anomalies"])
                .into_iter()
                .map(|r| Self::rename(r, "service", "application"))
                .filter(|r| arg("app_name").is_none_or(|app| r["application"] == app))
                .collect(),
            "get_commitment_recommendations" => Self::rows(&self.apptio["commitments"]),
            "get_rightsizing_recommendations" => Self::rows(&self.apptio["rightsizings"])
                .into_iter()
                .map(|r| Self::rename(r, "resourceId", "resource"))
                .filter(|r| {
                    arg("app_name").is_none_or(|app| self.owner(r["resource"].as_str().unwrap()).as_deref() == Some(app))
                })
                .collect(),
            other => panic!("no oracle for {other}"),
        }
    }
}

/// Sorted-key JSON of each row restricted to `fields`, as a set.
pub fn row_set<'a>(rows: impl IntoIterator<Item = &'a Map<String, Value>>, fields: &[&str]) -> BTreeSet<String> {
    rows.into_iter()
        .map(|r| {
            let projected: BTreeMap<&str, &Value> =
                fields.iter().map(|f| (*f, r.get(*f).unwrap_or(&Value::Null))).collect();
            serde_json::to_string(&projected).unwrap()
        })
        .collect()
}

pub fn value_rows(v: &Value) -> Vec<Map<String, Value>> {
    v.as_array()
        .map(|a| a.iter().filter_map(|r| r.as_object().cloned()).collect())
        .unwrap_or_default()
}

/// Every (endpoint, args) pair worth checking on the shipped fixtures.
pub fn endpoint_cases(fx: &Fixtures) -> Vec<(&'static str, Vec<(&'static str, String)>)> {
    let mut cases = vec![
        ("get_actions", vec![]),
        ("get_actions", vec![("entity_name", "vm-ob-01".to_string())]),
        ("get_actions", vec![("entity_name", "vm-pc-api".to_string())]),
        ("get_spending_anomaly_events", vec![]),
        ("get_commitment_recommendations", vec![]),
        ("get_rightsizing_recommendations", vec![]),
    ];
    for app in fx.applications() {
        cases.push(("get_entities", vec![("application_name", app.clone())]));
        cases.push(("get_actions", vec![("app_name", app.clone())]));
        cases.push(("get_spending_anomaly_events", vec![("app_name", app.clone())]));
        cases.push(("get_rightsizing_recommendations", vec![("app_name", app)]));
    }
    cases
}

pub fn query_text(endpoint: &str, args: &[(&str, String)], fields: &[&str]) -> String {
    let args = if args.is_empty() {
        String::new()
    } else {
        let a: Vec<String> = args.iter().map(|(k, v)| format!("{k}: {v:?}")).collect();
        format!("({})", a.join(", "))
    };
    format!("{{ {endpoint}{args} {{ {} }} }}", fields.join(" "))
}
