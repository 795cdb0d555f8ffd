//! Mock Turbonomic and Apptio backends.
//!
//! Fixture files keep each vendor's own key spelling (Apptio says `service`
//! for the owning application of an anomaly and `resourceId` for a
//! rightsizing target); records serialize back to that vendor shape and the
//! gateway's field mappings translate them to the unified schema.
//!
//! Sign convention: `costImpact` is USD/month, negative means savings.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TURBONOMIC_FILE: &str = "turbonomic.json";
pub const APPTIO_FILE: &str = "apptio.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityRec {
    pub id: i64,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub cost: f64,
    pub user_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ActionRec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub action_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<String>,
    pub target: String,
    pub cost_impact: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub business_criticality: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct AnomalyRec {
    pub id: String,
    #[serde(rename = "service")]
    pub application: String,
    pub anomaly_type: String,
    pub anomaly_value: f64,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct CommitmentRec {
    pub id: String,
    pub service: String,
    pub current_coverage: f64,
    pub recommended_commitment: f64,
    pub potential_savings: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct RightsizingRec {
    pub id: String,
    #[serde(rename = "resourceId")]
    pub resource: String,
    pub current_utilization: f64,
    pub recommended_size: String,
    pub estimated_savings: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbonomicData {
    pub applications: Vec<String>,
    pub entities: IndexMap<String, Vec<EntityRec>>,
    pub actions: Vec<ActionRec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApptioData {
    pub anomalies: Vec<AnomalyRec>,
    pub commitments: Vec<CommitmentRec>,
    pub rightsizings: Vec<RightsizingRec>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VendorError {
    #[error("MissingFile: {0}")]
    MissingFile(String),
    #[error("SchemaViolation in {file} at {path}: {message}")]
    SchemaViolation {
        file: String,
        path: String,
        message: String,
    },
    #[error("ReferentialError: {0}")]
    ReferentialError(String),
    #[error("ConflictingFilters: supply at most one of entity_name ({entity_name:?}) and app_name ({app_name:?})")]
    ConflictingFilters {
        entity_name: String,
        app_name: String,
    },
    #[error("failed to read {path}: {message}")]
    Io { path: String, message: String },
}

/// Both vendors' data, checked for ranges and referential closure.
/// Immutable once loaded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VendorStore {
    pub turbonomic: TurbonomicData,
    pub apptio: ApptioData,
}

fn parse_file<T: DeserializeOwned>(file: &str, text: &str) -> Result<T, VendorError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| VendorError::SchemaViolation {
        file: file.to_string(),
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn violation(file: &str, path: String, message: impl Into<String>) -> VendorError {
    VendorError::SchemaViolation {
        file: file.to_string(),
        path,
        message: message.into(),
    }
}

fn check_fraction(file: &str, path: String, v: f64) -> Result<(), VendorError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(violation(file, path, format!("fraction {v} outside [0, 1]")))
    }
}

fn check_non_negative(file: &str, path: String, v: f64) -> Result<(), VendorError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(violation(file, path, format!("amount {v} must be a finite value >= 0")))
    }
}

impl VendorStore {
    /// Builds a store from the two fixture documents.
    pub fn from_json(turbonomic: &str, apptio: &str) -> Result<Self, VendorError> {
        let store = Self {
            turbonomic: parse_file(TURBONOMIC_FILE, turbonomic)?,
            apptio: parse_file(APPTIO_FILE, apptio)?,
        };
        store.check()?;
        Ok(store)
    }

    /// The fixture set compiled into the crate (`fixtures/v1`).
    pub fn shipped() -> Self {
        Self::from_json(
            crate::assets::TURBONOMIC_FIXTURE,
            crate::assets::APPTIO_FIXTURE,
        )
        .expect("shipped fixtures are valid")
    }

    fn check(&self) -> Result<(), VendorError> {
        let t = &self.turbonomic;
        let a = &self.apptio;

        for (app, entities) in &t.entities {
            for (i, e) in entities.iter().enumerate() {
                check_non_negative(TURBONOMIC_FILE, format!("entities.{app}[{i}].cost"), e.cost)?;
            }
        }
        for (i, an) in a.anomalies.iter().enumerate() {
            if chrono::DateTime::parse_from_rfc3339(&an.timestamp).is_err() {
                return Err(violation(
                    APPTIO_FILE,
                    format!("anomalies[{i}].timestamp"),
                    format!("`{}` is not an ISO-8601 timestamp", an.timestamp),
                ));
            }
            if !an.anomaly_value.is_finite() {
                return Err(violation(
                    APPTIO_FILE,
                    format!("anomalies[{i}].anomalyValue"),
                    "not a finite number",
                ));
            }
        }
        for (i, c) in a.commitments.iter().enumerate() {
            check_fraction(APPTIO_FILE, format!("commitments[{i}].currentCoverage"), c.current_coverage)?;
            check_fraction(
                APPTIO_FILE,
                format!("commitments[{i}].recommendedCommitment"),
                c.recommended_commitment,
            )?;
            check_non_negative(APPTIO_FILE, format!("commitments[{i}].potentialSavings"), c.potential_savings)?;
        }
        for (i, r) in a.rightsizings.iter().enumerate() {
            check_fraction(
                APPTIO_FILE,
                format!("rightsizings[{i}].currentUtilization"),
                r.current_utilization,
            )?;
            check_non_negative(APPTIO_FILE, format!("rightsizings[{i}].estimatedSavings"), r.estimated_savings)?;
        }

        let apps: HashSet<&str> = t.applications.iter().map(String::as_str).collect();
        if apps.len() != t.applications.len() {
            return Err(VendorError::ReferentialError(
                "applications list contains duplicates".into(),
            ));
        }
        let mut entity_names = HashSet::new();
        for (app, entities) in &t.entities {
            if !apps.contains(app.as_str()) {
                return Err(VendorError::ReferentialError(format!(
                    "entities listed under unknown application `{app}`"
                )));
            }
            for e in entities {
                if !entity_names.insert(e.name.as_str()) {
                    return Err(VendorError::ReferentialError(format!(
                        "entity name `{}` appears more than once",
                        e.name
                    )));
                }
            }
        }
        for act in &t.actions {
            if !entity_names.contains(act.target.as_str()) {
                return Err(VendorError::ReferentialError(format!(
                    "action {} targets unknown entity `{}`",
                    act.id, act.target
                )));
            }
        }
        for r in &a.rightsizings {
            if !entity_names.contains(r.resource.as_str()) {
                return Err(VendorError::ReferentialError(format!(
                    "rightsizing {} names unknown resource `{}`",
                    r.id, r.resource
                )));
            }
        }
        for an in &a.anomalies {
            if !apps.contains(an.application.as_str()) {
                return Err(VendorError::ReferentialError(format!(
                    "anomaly {} belongs to unknown application `{}`",
                    an.id, an.application
                )));
            }
        }
        Ok(())
    }

    /// Application owning the named entity.
    pub fn entity_application(&self, entity_name: &str) -> Option<&str> {
        self.turbonomic
            .entities
            .iter()
            .find(|(_, es)| es.iter().any(|e| e.name == entity_name))
            .map(|(app, _)| app.as_str())
    }

    pub fn entity(&self, entity_name: &str) -> Option<&EntityRec> {
        self.turbonomic
            .entities
            .values()
            .flatten()
            .find(|e| e.name == entity_name)
    }

    fn app_entity_names(&self, app: &str) -> HashSet<&str> {
        self.turbonomic
            .entities
            .get(app)
            .map(|es| es.iter().map(|e| e.name.as_str()).collect())
            .unwrap_or_default()
    }

    /// Every record id in the store, for reference resolution checks.
    pub fn record_ids(&self) -> BTreeMap<String, &'static str> {
        let mut ids = BTreeMap::new();
        for e in self.turbonomic.entities.values().flatten() {
            ids.insert(e.id.to_string(), "entity");
            ids.insert(e.name.clone(), "entity");
        }
        for x in &self.turbonomic.actions {
            ids.insert(x.id.clone(), "action");
        }
        for x in &self.apptio.anomalies {
            ids.insert(x.id.clone(), "anomaly");
        }
        for x in &self.apptio.commitments {
            ids.insert(x.id.clone(), "commitment");
        }
        for x in &self.apptio.rightsizings {
            ids.insert(x.id.clone(), "rightsizing");
        }
        ids
    }
}

/// Reads `turbonomic.json` and `apptio.json` from `dir`.
pub fn load_fixtures(dir: &Path) -> Result<VendorStore, VendorError> {
    let read = |name: &str| -> Result<String, VendorError> {
        let path: PathBuf = dir.join(name);
        if !path.is_file() {
            return Err(VendorError::MissingFile(path.display().to_string()));
        }
        std::fs::read_to_string(&path).map_err(|e| VendorError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    };
    VendorStore::from_json(&read(TURBONOMIC_FILE)?, &read(APPTIO_FILE)?)
}

pub fn turbo_list_applications(store: &VendorStore) -> Vec<String> {
    store.turbonomic.applications.clone()
}

pub fn turbo_list_entities(store: &VendorStore, application_name: &str) -> Vec<EntityRec> {
    store
        .turbonomic
        .entities
        .get(application_name)
        .cloned()
        .unwrap_or_default()
}

pub fn turbo_list_actions(
    store: &VendorStore,
    entity_name: Option<&str>,
    app_name: Option<&str>,
) -> Result<Vec<ActionRec>, VendorError> {
    let actions = &store.turbonomic.actions;
    match (entity_name, app_name) {
        (Some(e), Some(a)) => Err(VendorError::ConflictingFilters {
            entity_name: e.to_string(),
            app_name: a.to_string(),
        }),
        (Some(e), None) => Ok(actions.iter().filter(|x| x.target == e).cloned().collect()),
        (None, Some(a)) => {
            let names = store.app_entity_names(a);
            Ok(actions
                .iter()
                .filter(|x| names.contains(x.target.as_str()))
                .cloned()
                .collect())
        }
        (None, None) => Ok(actions.clone()),
    }
}

pub fn apptio_list_anomalies(store: &VendorStore, app_name: Option<&str>) -> Vec<AnomalyRec> {
    store
        .apptio
        .anomalies
        .iter()
        .filter(|x| app_name.is_none_or(|a| x.application == a))
        .cloned()
        .collect()
}

pub fn apptio_list_commitments(store: &VendorStore) -> Vec<CommitmentRec> {
    store.apptio.commitments.clone()
}

pub fn apptio_list_rightsizings(store: &VendorStore, app_name: Option<&str>) -> Vec<RightsizingRec> {
    let names = app_name.map(|a| store.app_entity_names(a));
    store
        .apptio
        .rightsizings
        .iter()
        .filter(|x| names.as_ref().is_none_or(|n| n.contains(x.resource.as_str())))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use serde_json::Value;

    #[test]
    fn shipped_fixtures_load() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/v1");
        let store = load_fixtures(&dir).unwrap();
        assert_eq!(store, VendorStore::shipped());
        assert_eq!(
            turbo_list_applications(&store),
            ["OnlineBoutique", "PaymentsCore", "DataLakeETL"]
        );
    }

    #[test]
    fn missing_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_fixtures(dir.path()), Err(VendorError::MissingFile(_))));
    }

    #[test]
    fn entities_and_actions() {
        let store = VendorStore::shipped();
        let ob = turbo_list_entities(&store, "OnlineBoutique");
        assert_eq!(ob.len(), 4);
        assert!(ob.iter().any(|e| e.name == "vm-ob-01"));
        assert!(turbo_list_entities(&store, "NoSuchApp").is_empty());

        let a = turbo_list_actions(&store, Some("vm-ob-01"), None).unwrap();
        assert_eq!(a.iter().map(|x| x.id.as_str()).collect::<Vec<_>>(), ["A-101"]);
        assert_eq!(turbo_list_actions(&store, None, None).unwrap().len(), 5);
        let ob_actions = turbo_list_actions(&store, None, Some("OnlineBoutique")).unwrap();
        assert_eq!(ob_actions.len(), 3);
        assert!(matches!(
            turbo_list_actions(&store, Some("x"), Some("y")),
            Err(VendorError::ConflictingFilters { .. })
        ));
    }

    #[test]
    fn apptio_reads() {
        let store = VendorStore::shipped();
        let an = apptio_list_anomalies(&store, Some("OnlineBoutique"));
        assert_eq!(an.len(), 1);
        assert_eq!((an[0].id.as_str(), an[0].anomaly_value), ("AN-9", 1250.0));
        assert!(apptio_list_anomalies(&store, Some("Nope")).is_empty());

        let cr = apptio_list_commitments(&store);
        assert_eq!(cr.len(), 1);
        assert_eq!(
            (cr[0].current_coverage, cr[0].recommended_commitment, cr[0].potential_savings),
            (0.62, 0.80, 5400.0)
        );
        assert!(cr.iter().all(|c| c.recommended_commitment >= c.current_coverage));

        let rs = apptio_list_rightsizings(&store, Some("OnlineBoutique"));
        assert_eq!(rs.len(), 1);
        assert_eq!((rs[0].id.as_str(), rs[0].resource.as_str()), ("RS-1", "vm-ob-01"));
        assert_eq!(rs[0].estimated_savings, 220.0);
        assert!(apptio_list_rightsizings(&store, Some("Nope")).is_empty());
    }

    #[test]
    fn empty_store_reads() {
        let store = VendorStore::default();
        assert!(turbo_list_applications(&store).is_empty());
        assert!(apptio_list_commitments(&store).is_empty());
    }

    #[test]
    fn serializes_in_vendor_shape() {
        let store = VendorStore::shipped();
        let v = serde_json::to_value(&store.apptio.rightsizings[0]).unwrap();
        assert_eq!(v["resourceId"], "vm-ob-01");
        let v = serde_json::to_value(&store.apptio.anomalies[0]).unwrap();
        assert_eq!(v["service"], "OnlineBoutique");
    }

    #[test]
    fn reads_are_pure() {
        let store = VendorStore::shipped();
        assert_eq!(
            apptio_list_rightsizings(&store, None),
            apptio_list_rightsizings(&store, None)
        );
        assert_eq!(turbo_list_applications(&store), turbo_list_applications(&store));
    }

    #[test]
    fn scans_of_shipped_values() {
        let store = VendorStore::shipped();
        assert!(store.turbonomic.entities.values().flatten().all(|e| e.cost >= 0.0));
        assert!(store
            .apptio
            .anomalies
            .iter()
            .all(|a| chrono::DateTime::parse_from_rfc3339(&a.timestamp).is_ok()));
        assert!(store
            .apptio
            .rightsizings
            .iter()
            .all(|r| (0.0..=1.0).contains(&r.current_utilization)));
    }

    #[test]
    fn schema_violations_carry_paths() {
        let bad = assets::APPTIO_FIXTURE.replace("\"anomalyValue\": 1250.0", "\"anomalyValue\": \"lots\"");
        match VendorStore::from_json(assets::TURBONOMIC_FIXTURE, &bad) {
            Err(VendorError::SchemaViolation { path, .. }) => assert_eq!(path, "anomalies[0].anomalyValue"),
            other => panic!("{other:?}"),
        }
        let bad = assets::APPTIO_FIXTURE.replace("0.62", "1.62");
        match VendorStore::from_json(assets::TURBONOMIC_FIXTURE, &bad) {
            Err(VendorError::SchemaViolation { path, .. }) => {
                assert_eq!(path, "commitments[0].currentCoverage")
            }
            other => panic!("{other:?}"),
        }
        let bad = assets::APPTIO_FIXTURE.replace("2025-03-14T09:30:00Z", "last tuesday");
        assert!(VendorStore::from_json(assets::TURBONOMIC_FIXTURE, &bad).is_err());
    }

    #[test]
    fn action_with_unknown_target_is_rejected() {
        let bad = assets::TURBONOMIC_FIXTURE.replace("\"target\": \"vm-ob-02\"", "\"target\": \"vm-ob-99\"");
        assert!(matches!(
            VendorStore::from_json(&bad, assets::APPTIO_FIXTURE),
            Err(VendorError::ReferentialError(_))
        ));
    }

    /// Corrupts one referential field per trial and expects a rejection.
    #[test]
    fn every_referential_break_is_rejected() {
        let turbo: Value = serde_json::from_str(assets::TURBONOMIC_FIXTURE).unwrap();
        let apptio: Value = serde_json::from_str(assets::APPTIO_FIXTURE).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut rejected = 0;
        for trial in 0..100 {
            let (mut t, mut a) = (turbo.clone(), apptio.clone());
            let junk = format!("ghost-{trial}-{}", rng.random::<u32>());
            match rng.random_range(0..4) {
                0 => {
                    let n = t["actions"].as_array().unwrap().len();
                    t["actions"][rng.random_range(0..n)]["target"] = Value::from(junk);
                }
                1 => {
                    let n = a["rightsizings"].as_array().unwrap().len();
                    a["rightsizings"][rng.random_range(0..n)]["resourceId"] = Value::from(junk);
                }
                2 => {
                    let n = a["anomalies"].as_array().unwrap().len();
                    a["anomalies"][rng.random_range(0..n)]["service"] = Value::from(junk);
                }
                _ => {
                    let map = t["entities"].as_object_mut().unwrap();
                    let keys: Vec<String> = map.keys().cloned().collect();
                    let key = &keys[rng.random_range(0..keys.len())];
                    let v = map.remove(key).unwrap();
                    map.insert(junk, v);
                }
            }
            let r = VendorStore::from_json(&t.to_string(), &a.to_string());
            if matches!(r, Err(VendorError::ReferentialError(_))) {
                rejected += 1;
            }
        }
        assert_eq!(rejected, 100);
    }
}
