use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::query::{FieldSelection, Literal, QueryDocument, QueryError};
use super::{ArgDef, EndpointDef, UnifiedSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    SyntaxError,
    UnsupportedConstruct,
    EmptySelection,
    UnknownEndpoint,
    UnknownField,
    UnknownArgument,
    DuplicateArgument,
    ArgumentTypeMismatch,
    MissingRequiredArgument,
    LeafSelection,
    ResponseKeyConflict,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationError {
    pub code: ErrorCode,
    /// Response keys from the document root to the offending selection;
    /// empty for document-level problems.
    pub path: Vec<String>,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() {
            "<document>".to_string()
        } else {
            self.path.join(".")
        };
        write!(f, "{} at {}: {}", self.code, path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub errors: Vec<ValidationError>,
    /// Name used in the query -> canonical endpoint it resolved to.
    pub resolved_aliases: BTreeMap<String, String>,
}

impl ValidationReport {
    fn new(errors: Vec<ValidationError>, resolved_aliases: BTreeMap<String, String>) -> Self {
        Self {
            valid: errors.is_empty(),
            errors,
            resolved_aliases,
        }
    }

    /// Report for text that never parsed.
    pub fn from_parse_error(err: &QueryError) -> Self {
        let code = match err {
            QueryError::Syntax { .. } => ErrorCode::SyntaxError,
            QueryError::UnsupportedConstruct { .. } => ErrorCode::UnsupportedConstruct,
        };
        Self::new(
            vec![ValidationError {
                code,
                path: Vec::new(),
                message: err.to_string(),
            }],
            BTreeMap::new(),
        )
    }

    pub fn count(&self, code: ErrorCode) -> usize {
        self.errors.iter().filter(|e| e.code == code).count()
    }

    /// Multi-line rendering fed back to the model on a failed attempt.
    pub fn feedback(&self) -> String {
        self.errors
            .iter()
            .map(|e| format!("- {e}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// `appName` -> `app_name`. Arguments are matched exactly first, then by
/// their snake_case spelling.
pub(crate) fn snake_case(name: &str) -> String {
    let mut out = String::with_capacity(name.len() + 4);
    for (i, c) in name.chars().enumerate() {
        if c.is_ascii_uppercase() {
            if i > 0 {
                out.push('_');
            }
            out.push(c.to_ascii_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

pub(crate) fn lookup_arg<'a>(endpoint: &'a EndpointDef, name: &str) -> Option<&'a ArgDef> {
    endpoint
        .arg(name)
        .or_else(|| endpoint.arg(&snake_case(name)))
}

fn literal_fits(lit: &Literal, arg: &ArgDef, schema: &UnifiedSchema) -> bool {
    if arg.ty.is_list() {
        return false;
    }
    match (arg.ty.base_name(), lit) {
        ("String", Literal::Text(_)) => true,
        ("ID", Literal::Text(_) | Literal::Int(_)) => true,
        ("Int", Literal::Int(_)) => true,
        // Int widens to Float, never the reverse
        ("Float", Literal::Int(_) | Literal::Float(_)) => true,
        ("Boolean", Literal::Bool(_)) => true,
        (custom, _) => !super::BUILTIN_SCALARS.contains(&custom) && schema.is_scalar(custom),
    }
}

struct Checker<'a> {
    schema: &'a UnifiedSchema,
    errors: Vec<ValidationError>,
    aliases: BTreeMap<String, String>,
}

impl Checker<'_> {
    fn push(&mut self, code: ErrorCode, path: &[String], message: String) {
        self.errors.push(ValidationError {
            code,
            path: path.to_vec(),
            message,
        });
    }

    fn check_key_conflicts(&mut self, selections: &[FieldSelection], path: &[String]) {
        for (i, sel) in selections.iter().enumerate() {
            let clash = selections[..i].iter().any(|prev| {
                prev.response_key() == sel.response_key()
                    && (prev.name != sel.name || prev.arguments != sel.arguments)
            });
            if clash {
                let mut p = path.to_vec();
                p.push(sel.response_key().to_string());
                self.push(
                    ErrorCode::ResponseKeyConflict,
                    &p,
                    format!(
                        "response key `{}` is used by selections that differ",
                        sel.response_key()
                    ),
                );
            }
        }
    }

    fn check_endpoint(&mut self, sel: &FieldSelection) {
        let path = vec![sel.response_key().to_string()];
        let Some((endpoint, aliased)) = self.schema.resolve_endpoint(&sel.name) else {
            self.push(
                ErrorCode::UnknownEndpoint,
                &path,
                format!("`{}` is not a query endpoint of the unified schema", sel.name),
            );
            return;
        };
        if aliased {
            self.aliases
                .insert(sel.name.clone(), endpoint.name.clone());
        }

        let mut seen: Vec<&str> = Vec::new();
        for (arg_name, lit) in &sel.arguments {
            let Some(def) = lookup_arg(endpoint, arg_name) else {
                self.push(
                    ErrorCode::UnknownArgument,
                    &path,
                    format!("`{}` takes no argument `{arg_name}`", endpoint.name),
                );
                continue;
            };
            if seen.contains(&def.name.as_str()) {
                self.push(
                    ErrorCode::DuplicateArgument,
                    &path,
                    format!("argument `{}` given more than once", def.name),
                );
                continue;
            }
            seen.push(&def.name);
            if !literal_fits(lit, def, self.schema) {
                self.push(
                    ErrorCode::ArgumentTypeMismatch,
                    &path,
                    format!(
                        "argument `{arg_name}` expects {} but got {} literal {lit}",
                        def.ty,
                        lit.kind()
                    ),
                );
            }
        }
        for def in endpoint.args.iter().filter(|a| a.required()) {
            if !seen.contains(&def.name.as_str()) {
                self.push(
                    ErrorCode::MissingRequiredArgument,
                    &path,
                    format!("required argument `{}: {}` is missing", def.name, def.ty),
                );
            }
        }

        let ret = endpoint.return_type.base_name();
        self.check_selection_set(ret, &sel.selections, &path, &endpoint.name);
    }

    fn check_selection_set(
        &mut self,
        type_name: &str,
        selections: &[FieldSelection],
        path: &[String],
        owner: &str,
    ) {
        if self.schema.is_scalar(type_name) {
            if !selections.is_empty() {
                self.push(
                    ErrorCode::LeafSelection,
                    path,
                    format!("`{owner}` returns scalar {type_name}; it takes no sub-selection"),
                );
            }
            return;
        }
        let Some(def) = self.schema.type_def(type_name) else {
            // only reachable with a hand-built schema
            self.push(
                ErrorCode::UnknownField,
                path,
                format!("type `{type_name}` is not declared"),
            );
            return;
        };
        if selections.is_empty() {
            let fields: Vec<&str> = def.fields.iter().map(|f| f.name.as_str()).collect();
            self.push(
                ErrorCode::EmptySelection,
                path,
                format!(
                    "`{owner}` returns {type_name}; select at least one of: {}",
                    fields.join(", ")
                ),
            );
            return;
        }
        self.check_key_conflicts(selections, path);
        for child in selections {
            let mut child_path = path.to_vec();
            child_path.push(child.response_key().to_string());
            let Some(field) = def.field(&child.name) else {
                let fields: Vec<&str> = def.fields.iter().map(|f| f.name.as_str()).collect();
                self.push(
                    ErrorCode::UnknownField,
                    &child_path,
                    format!(
                        "type {type_name} has no field `{}`; available: {}",
                        child.name,
                        fields.join(", ")
                    ),
                );
                continue;
            };
            if !child.arguments.is_empty() {
                self.push(
                    ErrorCode::UnknownArgument,
                    &child_path,
                    format!("field `{type_name}.{}` takes no arguments", child.name),
                );
            }
            let owner = format!("{type_name}.{}", child.name);
            self.check_selection_set(field.ty.base_name(), &child.selections, &child_path, &owner);
        }
    }
}

/// Checks a parsed query against the schema. Never fails: every problem is
/// reported inside the returned [`ValidationReport`].
pub fn validate_query(doc: &QueryDocument, schema: &UnifiedSchema) -> ValidationReport {
    let mut checker = Checker {
        schema,
        errors: Vec::new(),
        aliases: BTreeMap::new(),
    };
    if doc.selections.is_empty() {
        checker.push(
            ErrorCode::EmptySelection,
            &[],
            "the query selects no endpoint".into(),
        );
    }
    checker.check_key_conflicts(&doc.selections, &[]);
    for sel in &doc.selections {
        checker.check_endpoint(sel);
    }
    ValidationReport::new(checker.errors, checker.aliases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::schema::{parse_query, CANONICAL_ENDPOINTS};
    use proptest::prelude::*;

    fn check(text: &str) -> ValidationReport {
        validate_query(&parse_query(text).unwrap(), &assets::unified_schema())
    }

    #[test]
    fn reconciled_federated_sample_is_valid_through_two_aliases() {
        let report = check(assets::REVIEW_OPTIMIZATION_QUERY);
        assert!(report.valid, "{:?}", report.errors);
        assert_eq!(report.resolved_aliases.len(), 2);
        assert_eq!(
            report.resolved_aliases["apptioGetSpendingAnomalyEvents"],
            "get_spending_anomaly_events"
        );
        assert_eq!(report.resolved_aliases["turbonomicGetActions"], "get_actions");
    }

    #[test]
    fn verbatim_federated_sample_flags_fields_missing_from_the_schema() {
        let report = check(assets::FEDERATED_SAMPLE_QUERY);
        assert!(!report.valid);
        assert_eq!(report.resolved_aliases.len(), 2);
        let paths: Vec<String> = report.errors.iter().map(|e| e.path.join(".")).collect();
        assert_eq!(
            paths,
            [
                "apptioGetSpendingAnomalyEvents.severity",
                "turbonomicGetActions.recommendation"
            ]
        );
        assert_eq!(report.count(ErrorCode::UnknownField), 2);
    }

    #[test]
    fn without_aliases_both_federated_sample_names_are_unknown() {
        let schema = assets::unified_schema().without_aliases();
        let doc = parse_query(assets::REVIEW_OPTIMIZATION_QUERY).unwrap();
        let report = validate_query(&doc, &schema);
        assert_eq!(report.errors.len(), 2);
        assert_eq!(report.count(ErrorCode::UnknownEndpoint), 2);
        assert!(report.resolved_aliases.is_empty());
    }

    #[test]
    fn empty_document() {
        let report = validate_query(&QueryDocument::new(vec![]), &assets::unified_schema());
        assert!(!report.valid);
        assert_eq!(report.errors[0].code, ErrorCode::EmptySelection);
    }

    #[test]
    fn argument_rules() {
        let r = check(r#"{ get_entities { id } }"#);
        assert_eq!(r.errors[0].code, ErrorCode::MissingRequiredArgument);
        let r = check(r#"{ get_entities(application_name: 3) { id } }"#);
        assert_eq!(r.errors[0].code, ErrorCode::ArgumentTypeMismatch);
        let r = check(r#"{ get_entities(application_name: "a", foo: 1) { id } }"#);
        assert_eq!(r.errors[0].code, ErrorCode::UnknownArgument);
        let r = check(r#"{ get_actions(app_name: "a", appName: "b") { id } }"#);
        assert_eq!(r.errors[0].code, ErrorCode::DuplicateArgument);
        assert!(check(r#"{ get_entities(applicationName: "a") { id } }"#).valid);
    }

    #[test]
    fn selection_shape_rules() {
        let r = check("{ get_applications_names { id } }");
        assert_eq!(r.errors[0].code, ErrorCode::LeafSelection);
        let r = check(r#"{ get_entities(application_name: "a") }"#);
        assert_eq!(r.errors[0].code, ErrorCode::EmptySelection);
        let r = check(r#"{ get_entities(application_name: "a") { id(x: 1) } }"#);
        assert_eq!(r.errors[0].code, ErrorCode::UnknownArgument);
        let r = check(r#"{ a: get_applications_names a: get_commitment_recommendations { id } }"#);
        assert_eq!(r.errors[0].code, ErrorCode::ResponseKeyConflict);
        assert!(check("{ get_applications_names get_applications_names }").valid);
    }

    #[test]
    fn int_widens_to_float_only() {
        let mut schema = crate::schema::parse_schema(
            "type Query { f(x: Float, i: Int, id: ID, b: Boolean): String }",
        )
        .unwrap();
        schema.alias_table.clear();
        let run = |q: &str| validate_query(&parse_query(q).unwrap(), &schema).valid;
        assert!(run("{ f(x: 1) }"));
        assert!(run("{ f(x: 1.5) }"));
        assert!(!run("{ f(i: 1.5) }"));
        assert!(run("{ f(id: 7) }"));
        assert!(run(r#"{ f(id: "7") }"#));
        assert!(!run(r#"{ f(b: "true") }"#));
    }

    #[test]
    fn parse_errors_become_reports() {
        let err = parse_query("mutation { x }").unwrap_err();
        let report = ValidationReport::from_parse_error(&err);
        assert!(!report.valid);
        assert_eq!(report.errors[0].code, ErrorCode::UnsupportedConstruct);
        assert!(report.feedback().starts_with("- UnsupportedConstruct at <document>"));
    }

    fn valid_corpus() -> Vec<String> {
        let mut v = vec![assets::REVIEW_OPTIMIZATION_QUERY.to_string()];
        v.extend(assets::exemplar_bank_raw().into_iter().map(|(_, q)| q));
        v
    }

    #[test]
    fn valid_names_all_resolve_by_direct_scan() {
        let schema = assets::unified_schema();
        for text in valid_corpus() {
            let doc = parse_query(&text).unwrap();
            assert!(validate_query(&doc, &schema).valid);
            for sel in &doc.selections {
                assert!(
                    CANONICAL_ENDPOINTS.contains(&sel.name.as_str())
                        || schema.alias_table.contains_key(&sel.name)
                );
            }
        }
    }

    proptest! {
        #[test]
        fn corrupting_one_endpoint_character_yields_one_error(
            which in 0usize..64,
            pos in 0usize..64,
            replacement in "[a-zA-Z0-9_]",
        ) {
            let corpus = valid_corpus();
            let text = &corpus[which % corpus.len()];
            let mut doc = parse_query(text).unwrap();
            let n = doc.selections.len();
            let sel = &mut doc.selections[which % n];
            let chars: Vec<char> = sel.name.chars().collect();
            let at = pos % chars.len();
            let new_char = replacement.chars().next().unwrap();
            prop_assume!(chars[at] != new_char);
            prop_assume!(!(at == 0 && new_char.is_ascii_digit()));
            let mut corrupted = chars.clone();
            corrupted[at] = new_char;
            sel.name = corrupted.into_iter().collect();
            // reparse the rendered text so the corruption goes through the parser too
            let doc = parse_query(&doc.to_string()).unwrap();
            let report = validate_query(&doc, &assets::unified_schema());
            prop_assert!(!report.valid);
            prop_assert_eq!(report.errors.len(), 1);
            prop_assert!(matches!(report.errors[0].code, ErrorCode::UnknownEndpoint | ErrorCode::UnknownField));
        }
    }
}
