use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::gateway::merge::conflicting_field;
use crate::gateway::{normalize_name, Dimension, RecordKind, UnifiedRecord};
use crate::schema::validate::snake_case;

/// One successful top-level result, tagged with the iteration it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolObservation {
    pub iteration: usize,
    pub tool: String,
    #[serde(default)]
    pub args: Map<String, Value>,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub kind: RecordKind,
    pub fields: Map<String, Value>,
    /// Iteration whose observation first carried the record.
    pub provenance: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AppView {
    pub application: String,
    pub entities: Vec<DatasetRecord>,
    pub actions: Vec<DatasetRecord>,
    pub anomalies: Vec<DatasetRecord>,
    pub rightsizings: Vec<DatasetRecord>,
}

impl AppView {
    fn list_mut(&mut self, kind: RecordKind) -> &mut Vec<DatasetRecord> {
        match kind {
            RecordKind::Entity => &mut self.entities,
            RecordKind::Action => &mut self.actions,
            RecordKind::SpendingAnomaly => &mut self.anomalies,
            _ => &mut self.rightsizings,
        }
    }

    fn records(&self) -> impl Iterator<Item = &DatasetRecord> {
        self.entities
            .iter()
            .chain(&self.actions)
            .chain(&self.anomalies)
            .chain(&self.rightsizings)
    }
}

/// Retrieved data grouped by normalized application name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsolidatedDataset {
    /// Keyed by normalized application name.
    pub applications: BTreeMap<String, AppView>,
    pub commitments: Vec<DatasetRecord>,
    /// Records whose entity or application could not be placed.
    pub unattributed: Vec<DatasetRecord>,
    pub annotations: Vec<String>,
}

impl ConsolidatedDataset {
    pub fn is_empty(&self) -> bool {
        self.applications.is_empty() && self.commitments.is_empty() && self.unattributed.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &DatasetRecord> {
        self.applications
            .values()
            .flat_map(AppView::records)
            .chain(&self.commitments)
            .chain(&self.unattributed)
    }

    pub fn record_count(&self) -> usize {
        self.records().count()
    }

    /// Record ids present in the dataset.
    pub fn ids(&self) -> BTreeSet<String> {
        self.records()
            .filter_map(|r| UnifiedRecord::new(r.kind, r.fields.clone()).id())
            .collect()
    }

    pub fn find(&self, id: &str) -> Option<&DatasetRecord> {
        self.records()
            .find(|r| UnifiedRecord::new(r.kind, r.fields.clone()).id().as_deref() == Some(id))
    }

    /// Order-free summary used for equality against a reference join:
    /// per type, the set of `app|id|fields` strings with nulls dropped.
    pub fn fingerprint(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for app in self.applications.keys() {
            out.entry("Application".into()).or_default().insert(app.clone());
        }
        for (app, view) in &self.applications {
            for r in view.records() {
                out.entry(r.kind.type_name().into())
                    .or_default()
                    .insert(fingerprint_line(app, &r.fields));
            }
        }
        for r in self.commitments.iter().chain(&self.unattributed) {
            out.entry(r.kind.type_name().into())
                .or_default()
                .insert(fingerprint_line("", &r.fields));
        }
        out
    }
}

/// `app|normalized-id|{non-null fields except id}`.
pub fn fingerprint_line(app: &str, fields: &Map<String, Value>) -> String {
    let id = fields
        .get("id")
        .map(|v| match v {
            Value::String(s) => s.trim().to_lowercase(),
            other => other.to_string(),
        })
        .unwrap_or_default();
    let rest: Map<String, Value> = fields
        .iter()
        .filter(|(k, v)| *k != "id" && !v.is_null())
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    format!("{app}|{id}|{}", Value::Object(rest))
}

fn arg<'a>(args: &'a Map<String, Value>, canonical: &str) -> Option<&'a str> {
    args.iter()
        .find(|(k, _)| *k == canonical || snake_case(k) == canonical)
        .and_then(|(_, v)| v.as_str())
}

fn objects(value: &Value) -> impl Iterator<Item = &Map<String, Value>> {
    value.as_array().into_iter().flatten().filter_map(Value::as_object)
}

fn kind_of(tool: &str) -> Option<RecordKind> {
    RecordKind::ALL.into_iter().find(|k| k.endpoint() == tool)
}

struct Builder {
    ds: ConsolidatedDataset,
    /// normalized entity name -> normalized application
    owner: BTreeMap<String, String>,
}

impl Builder {
    fn view(&mut self, display: &str) -> (String, &mut AppView) {
        let key = normalize_name(display, Dimension::Application);
        let view = self.ds.applications.entry(key.clone()).or_insert_with(|| AppView {
            application: display.to_string(),
            ..AppView::default()
        });
        (key, view)
    }

    fn annotate(&mut self, note: String) {
        if !self.ds.annotations.contains(&note) {
            self.ds.annotations.push(note);
        }
    }

    /// Adds `rec` unless a record with the same dedup key is already there.
    fn push(&mut self, app: Option<&str>, kind: RecordKind, fields: &Map<String, Value>, iteration: usize) {
        let rec = UnifiedRecord::new(kind, fields.clone());
        let key = rec.dedup_key();
        let list: &mut Vec<DatasetRecord> = match app {
            Some(a) => self.view(a).1.list_mut(kind),
            None if kind == RecordKind::CommitmentRecommendation => &mut self.ds.commitments,
            None => &mut self.ds.unattributed,
        };
        let existing = list
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| UnifiedRecord::new(kind, r.fields.clone()))
            .find(|r| r.dedup_key() == key);
        match existing {
            Some(first) => {
                if let Some((field, a, b)) = conflicting_field(&first, &rec) {
                    self.annotate(format!(
                        "KeyConflict: {kind} `{key}` differs on `{field}` ({a} vs {b}); kept the first"
                    ));
                }
            }
            None => list.push(DatasetRecord {
                kind,
                fields: fields.clone(),
                provenance: iteration,
            }),
        }
    }
}

/// Groups observations by application and joins entity-level records to
/// their owners. Conflicting duplicates are annotated, never fatal.
pub fn consolidate(observations: &[ToolObservation]) -> ConsolidatedDataset {
    let mut b = Builder {
        ds: ConsolidatedDataset::default(),
        owner: BTreeMap::new(),
    };
    // applications and entities first so later joins can see every owner
    for obs in observations {
        match obs.tool.as_str() {
            "get_applications_names" => {
                for name in obs.value.as_array().into_iter().flatten().filter_map(Value::as_str) {
                    b.view(name);
                }
            }
            "get_entities" => {
                let Some(app) = arg(&obs.args, "application_name") else {
                    b.annotate(format!("iteration {}: entities without an application filter", obs.iteration));
                    continue;
                };
                let app_key = b.view(app).0;
                let display = b.ds.applications[&app_key].application.clone();
                for e in objects(&obs.value) {
                    if let Some(name) = e.get("name").and_then(Value::as_str) {
                        b.owner
                            .entry(normalize_name(name, Dimension::Entity))
                            .or_insert_with(|| app_key.clone());
                    }
                    b.push(Some(&display), RecordKind::Entity, e, obs.iteration);
                }
            }
            _ => {}
        }
    }
    for obs in observations {
        let Some(kind) = kind_of(&obs.tool).filter(|k| *k != RecordKind::Entity) else {
            continue;
        };
        for rec in objects(&obs.value) {
            let app_key = match kind {
                RecordKind::Action => rec.get("target"),
                RecordKind::RightsizingRecommendation => rec.get("resource"),
                _ => None,
            }
            .and_then(Value::as_str)
            .and_then(|n| b.owner.get(&normalize_name(n, Dimension::Entity)).cloned());
            let app = match kind {
                RecordKind::SpendingAnomaly => rec
                    .get("application")
                    .and_then(Value::as_str)
                    .map(|a| {
                        let k = b.view(a).0;
                        b.ds.applications[&k].application.clone()
                    }),
                RecordKind::CommitmentRecommendation => None,
                _ => app_key.map(|k| b.ds.applications[&k].application.clone()),
            };
            b.push(app.as_deref(), kind, rec, obs.iteration);
        }
    }
    b.ds
}
