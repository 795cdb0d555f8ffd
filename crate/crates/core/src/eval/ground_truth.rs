use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::agent::fingerprint_line;
use crate::assets;
use crate::gateway::{normalize_name, Dimension};

#[derive(Debug, Error)]
pub enum GroundTruthError {
    #[error("IoError: {path}: {message}")]
    Io { path: String, message: String },
    #[error("ParseError: {0}")]
    Parse(String),
    #[error("InvalidGroundTruth: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalStep {
    pub id: String,
    pub tool: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordPredicate {
    pub min_valid_records: usize,
    pub require_resolved_refs: bool,
}

impl Default for RecordPredicate {
    fn default() -> Self {
        Self {
            min_valid_records: 1,
            require_resolved_refs: true,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthFile {
    #[serde(default)]
    use_case: String,
    canonical_steps: Vec<CanonicalStep>,
    #[serde(default)]
    precedence: Vec<(String, String)>,
    #[serde(default)]
    interchange_groups: Vec<Vec<String>>,
    #[serde(default)]
    record_predicate: RecordPredicate,
}

/// Expected plan, plus the dataset a perfect run should consolidate to.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub use_case: String,
    pub canonical_steps: Vec<CanonicalStep>,
    pub precedence: Vec<(String, String)>,
    pub interchange_groups: Vec<BTreeSet<String>>,
    pub record_predicate: RecordPredicate,
    /// Same shape as `ConsolidatedDataset::fingerprint`.
    pub oracle_dataset: BTreeMap<String, BTreeSet<String>>,
}

impl GroundTruth {
    pub fn from_json(gt_json: &str, turbonomic_json: &str, apptio_json: &str) -> Result<Self, GroundTruthError> {
        let de = &mut serde_json::Deserializer::from_str(gt_json);
        let file: GroundTruthFile =
            serde_path_to_error::deserialize(de).map_err(|e| GroundTruthError::Parse(e.to_string()))?;
        let gt = Self {
            use_case: file.use_case,
            canonical_steps: file.canonical_steps,
            precedence: file.precedence,
            interchange_groups: file
                .interchange_groups
                .into_iter()
                .map(|g| g.into_iter().collect())
                .collect(),
            record_predicate: file.record_predicate,
            oracle_dataset: oracle_dataset(turbonomic_json, apptio_json)?,
        };
        gt.check()?;
        Ok(gt)
    }

    /// `groundtruth/use_case_1.json` over `fixtures/v1`.
    pub fn shipped() -> Self {
        Self::from_json(assets::GROUND_TRUTH_JSON, assets::TURBONOMIC_FIXTURE, assets::APPTIO_FIXTURE)
            .expect("shipped ground truth is valid")
    }

    pub fn load(path: &Path, fixtures_dir: &Path) -> Result<Self, GroundTruthError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| GroundTruthError::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            })
        };
        Self::from_json(
            &read(path)?,
            &read(&fixtures_dir.join("turbonomic.json"))?,
            &read(&fixtures_dir.join("apptio.json"))?,
        )
    }

    pub fn step_for_tool(&self, tool: &str) -> Option<&CanonicalStep> {
        self.canonical_steps.iter().find(|s| s.tool == tool)
    }

    pub fn tool_of(&self, id: &str) -> Option<&str> {
        self.canonical_steps.iter().find(|s| s.id == id).map(|s| s.tool.as_str())
    }

    pub fn same_group(&self, a: &str, b: &str) -> bool {
        self.interchange_groups.iter().any(|g| g.contains(a) && g.contains(b))
    }

    fn check(&self) -> Result<(), GroundTruthError> {
        let invalid = |m: String| Err(GroundTruthError::Invalid(m));
        if self.canonical_steps.is_empty() {
            return invalid("no canonical steps".into());
        }
        let mut ids = BTreeSet::new();
        let mut tools = BTreeSet::new();
        for s in &self.canonical_steps {
            if !ids.insert(s.id.as_str()) {
                return invalid(format!("duplicate step id {}", s.id));
            }
            if !tools.insert(s.tool.as_str()) {
                return invalid(format!("tool {} is bound to two steps", s.tool));
            }
        }
        for (a, b) in &self.precedence {
            for id in [a, b] {
                if !ids.contains(id.as_str()) {
                    return invalid(format!("precedence names unknown step {id}"));
                }
            }
        }
        for g in &self.interchange_groups {
            if let Some(id) = g.iter().find(|id| !ids.contains(id.as_str())) {
                return invalid(format!("interchange group names unknown step {id}"));
            }
            if let Some((a, b)) = self.precedence.iter().find(|(a, b)| g.contains(a) && g.contains(b)) {
                return invalid(format!("{a} and {b} share an interchange group and a precedence edge"));
            }
        }
        // Kahn: every step must eventually lose all its incoming edges
        let mut indegree: BTreeMap<&str, usize> = ids.iter().map(|id| (*id, 0)).collect();
        for (_, b) in &self.precedence {
            *indegree.get_mut(b.as_str()).unwrap() += 1;
        }
        let mut ready: Vec<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(id, _)| *id).collect();
        let mut seen = 0;
        while let Some(id) = ready.pop() {
            seen += 1;
            for (_, b) in self.precedence.iter().filter(|(a, _)| a == id) {
                let d = indegree.get_mut(b.as_str()).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(b);
                }
            }
        }
        if seen != ids.len() {
            return invalid("precedence has a cycle".into());
        }
        Ok(())
    }
}

fn parse_value(label: &str, text: &str) -> Result<Value, GroundTruthError> {
    serde_json::from_str(text).map_err(|e| GroundTruthError::Parse(format!("{label}: {e}")))
}

fn rows<'a>(v: &'a Value, key: &str) -> impl Iterator<Item = &'a Map<String, Value>> {
    v.get(key).and_then(Value::as_array).into_iter().flatten().filter_map(Value::as_object)
}

fn renamed(row: &Map<String, Value>, from: &str, to: &str) -> Map<String, Value> {
    row.iter()
        .map(|(k, v)| (if k == from { to.to_string() } else { k.clone() }, v.clone()))
        .collect()
}

/// Joins the raw vendor files directly: every record, attributed to the
/// application that owns it, keyed the way consolidation keys its output.
pub fn oracle_dataset(
    turbonomic_json: &str,
    apptio_json: &str,
) -> Result<BTreeMap<String, BTreeSet<String>>, GroundTruthError> {
    let turbo = parse_value("turbonomic.json", turbonomic_json)?;
    let apptio = parse_value("apptio.json", apptio_json)?;
    let app_key = |a: &str| normalize_name(a, Dimension::Application);
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut add = |ty: &str, line: String| {
        out.entry(ty.to_string()).or_default().insert(line);
    };

    for a in turbo.get("applications").and_then(Value::as_array).into_iter().flatten() {
        if let Some(a) = a.as_str() {
            add("Application", app_key(a));
        }
    }
    let mut owner: Vec<(String, String)> = Vec::new();
    if let Some(by_app) = turbo.get("entities").and_then(Value::as_object) {
        for (app, list) in by_app {
            add("Application", app_key(app));
            for e in list.as_array().into_iter().flatten().filter_map(Value::as_object) {
                if let Some(name) = e.get("name").and_then(Value::as_str) {
                    owner.push((name.to_string(), app_key(app)));
                }
                add("Entity", fingerprint_line(&app_key(app), e));
            }
        }
    }
    let owner_of = |target: Option<&Value>| -> String {
        let Some(t) = target.and_then(Value::as_str) else {
            return String::new();
        };
        let t = normalize_name(t, Dimension::Entity);
        owner
            .iter()
            .find(|(name, _)| normalize_name(name, Dimension::Entity) == t)
            .map(|(_, app)| app.clone())
            .unwrap_or_default()
    };
    for a in rows(&turbo, "actions") {
        add("Action", fingerprint_line(&owner_of(a.get("target")), a));
    }
    for r in rows(&apptio, "rightsizings") {
        let r = renamed(r, "resourceId", "resource");
        add("RightsizingRecommendation", fingerprint_line(&owner_of(r.get("resource")), &r));
    }
    for c in rows(&apptio, "commitments") {
        add("CommitmentRecommendation", fingerprint_line("", c));
    }
    for an in rows(&apptio, "anomalies") {
        let an = renamed(an, "service", "application");
        let app = an.get("application").and_then(Value::as_str).map(app_key).unwrap_or_default();
        if !app.is_empty() {
            add("Application", app.clone());
        }
        add("SpendingAnomaly", fingerprint_line(&app, &an));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_ground_truth() {
        let gt = GroundTruth::shipped();
        assert_eq!(gt.canonical_steps.len(), 6);
        assert_eq!(gt.step_for_tool("get_actions").unwrap().id, "S3");
        assert!(gt.same_group("S4", "S6"));
        assert!(!gt.same_group("S3", "S4"));
        let o = &gt.oracle_dataset;
        assert_eq!(o["Application"].len(), 3);
        assert_eq!(o["Entity"].len(), 8);
        assert_eq!(o["Action"].len(), 5);
        assert_eq!(o["SpendingAnomaly"].len(), 2);
        assert_eq!(o["CommitmentRecommendation"].len(), 1);
        assert_eq!(o["RightsizingRecommendation"].len(), 2);
        assert!(o["Action"].iter().any(|l| l.starts_with("onlineboutique|a-101|")));
        assert!(o["RightsizingRecommendation"].iter().any(|l| l.starts_with("datalakeetl|rs-2|")));
    }

    fn with(edit: impl Fn(&mut Value)) -> Result<GroundTruth, GroundTruthError> {
        let mut v: Value = serde_json::from_str(assets::GROUND_TRUTH_JSON).unwrap();
        edit(&mut v);
        GroundTruth::from_json(&v.to_string(), assets::TURBONOMIC_FIXTURE, assets::APPTIO_FIXTURE)
    }

    #[test]
    fn rejects_bad_ground_truth() {
        let cyc = with(|v| v["precedence"].as_array_mut().unwrap().push(serde_json::json!(["S6", "S1"])));
        assert!(matches!(cyc, Err(GroundTruthError::Invalid(m)) if m.contains("cycle")));
        let grouped = with(|v| v["interchange_groups"] = serde_json::json!([["S3", "S4"]]));
        assert!(matches!(grouped, Err(GroundTruthError::Invalid(m)) if m.contains("interchange")));
        let unknown = with(|v| v["precedence"] = serde_json::json!([["S1", "S9"]]));
        assert!(matches!(unknown, Err(GroundTruthError::Invalid(_))));
        let dup = with(|v| v["canonical_steps"][1]["id"] = "S1".into());
        assert!(matches!(dup, Err(GroundTruthError::Invalid(_))));
        let typo = with(|v| v["precedense"] = serde_json::json!([]));
        assert!(matches!(typo, Err(GroundTruthError::Parse(_))));
    }
}
