//! Shipped data files compiled into the library, so examples, tests and
//! `finops seed` work from any directory.

use crate::schema::{parse_aliases, parse_schema, UnifiedSchema};

pub const SCHEMA_SDL: &str = include_str!("../../../schema/unified.graphql");
pub const ALIASES_JSON: &str = include_str!("../../../schema/aliases.json");
pub const TURBONOMIC_FIXTURE: &str = include_str!("../../../fixtures/v1/turbonomic.json");
pub const APPTIO_FIXTURE: &str = include_str!("../../../fixtures/v1/apptio.json");
pub const FEDERATED_SAMPLE_QUERY: &str = include_str!("../../../queries/federated_sample.graphql");
pub const REVIEW_OPTIMIZATION_QUERY: &str =
    include_str!("../../../queries/review_optimization.graphql");
pub const EXEMPLAR_BANK_JSON: &str = include_str!("../../../exemplars/bank.json");
pub const GROUND_TRUTH_JSON: &str = include_str!("../../../groundtruth/use_case_1.json");
pub const EVAL_TOML: &str = include_str!("../../../eval.toml");

pub const SCRIPT_PERFECT: &str = include_str!("../../../scripts/perfect.json");
pub const SCRIPT_LAZY: &str = include_str!("../../../scripts/lazy.json");
pub const SCRIPT_LATE_RECOGNITION: &str = include_str!("../../../scripts/late_recognition.json");
pub const SCRIPT_NO_TOOLS: &str = include_str!("../../../scripts/no_tools.json");
pub const SCRIPT_FOLLOWUP: &str = include_str!("../../../scripts/followup.json");
pub const SCRIPT_TRANSLATE_TWO_TURN: &str =
    include_str!("../../../scripts/translate_two_turn.json");
pub const SCRIPT_TRANSLATE_ALWAYS_BAD: &str =
    include_str!("../../../scripts/translate_always_bad.json");
pub const SCRIPT_TRANSLATE_FEDERATED_SAMPLE: &str =
    include_str!("../../../scripts/translate_federated_sample.json");

/// The practitioner request used throughout the shipped scripts.
pub const USE_CASE_QUERY: &str = "Help me review pending resource and cost optimization recommendations for our IT infrastructure to accommodate a new product launch without increasing the budget";

/// Every shipped file as (path relative to the workspace root, contents).
pub const ALL: &[(&str, &str)] = &[
    ("schema/unified.graphql", SCHEMA_SDL),
    ("schema/aliases.json", ALIASES_JSON),
    ("fixtures/v1/turbonomic.json", TURBONOMIC_FIXTURE),
    ("fixtures/v1/apptio.json", APPTIO_FIXTURE),
    ("queries/federated_sample.graphql", FEDERATED_SAMPLE_QUERY),
    ("queries/review_optimization.graphql", REVIEW_OPTIMIZATION_QUERY),
    ("exemplars/bank.json", EXEMPLAR_BANK_JSON),
    ("groundtruth/use_case_1.json", GROUND_TRUTH_JSON),
    ("eval.toml", EVAL_TOML),
    ("scripts/perfect.json", SCRIPT_PERFECT),
    ("scripts/lazy.json", SCRIPT_LAZY),
    ("scripts/late_recognition.json", SCRIPT_LATE_RECOGNITION),
    ("scripts/no_tools.json", SCRIPT_NO_TOOLS),
    ("scripts/followup.json", SCRIPT_FOLLOWUP),
    ("scripts/translate_two_turn.json", SCRIPT_TRANSLATE_TWO_TURN),
    ("scripts/translate_always_bad.json", SCRIPT_TRANSLATE_ALWAYS_BAD),
    ("scripts/translate_federated_sample.json", SCRIPT_TRANSLATE_FEDERATED_SAMPLE),
];

/// Shipped schema with the shipped alias table installed.
pub fn unified_schema() -> UnifiedSchema {
    parse_schema(SCHEMA_SDL)
        .and_then(|s| s.with_aliases(parse_aliases(ALIASES_JSON)?))
        .expect("shipped schema is valid")
}

/// Raw `(nl, query)` pairs from the shipped exemplar bank.
pub fn exemplar_bank_raw() -> Vec<(String, String)> {
    #[derive(serde::Deserialize)]
    struct Raw {
        nl: String,
        query: String,
    }
    let raw: Vec<Raw> = serde_json::from_str(EXEMPLAR_BANK_JSON).expect("shipped bank is valid");
    raw.into_iter().map(|r| (r.nl, r.query)).collect()
}
