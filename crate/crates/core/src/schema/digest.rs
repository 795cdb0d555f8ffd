use std::fmt;

use serde::Serialize;

use super::{EndpointDef, UnifiedSchema, Vendor};

/// Upper bound on [`SchemaDigest::render`] output, in bytes.
pub const DIGEST_BYTE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DigestEntry {
    pub name: String,
    pub signature: String,
    pub return_type: String,
    pub return_fields: Vec<String>,
    pub vendor: Vendor,
    pub description: String,
}

impl DigestEntry {
    fn from_endpoint(ep: &EndpointDef, schema: &UnifiedSchema) -> Self {
        let return_fields = schema
            .type_def(ep.return_type.base_name())
            .map(|t| t.fields.iter().map(|f| f.name.clone()).collect())
            .unwrap_or_default();
        let description = ep
            .description
            .lines()
            .next()
            .unwrap_or_default()
            .trim()
            .to_string();
        Self {
            name: ep.name.clone(),
            signature: ep.signature(),
            return_type: ep.return_type.to_string(),
            return_fields,
            vendor: ep.source_vendor,
            description,
        }
    }

    fn head(&self) -> String {
        let mut line = format!("{}{}: {}", self.name, self.signature, self.return_type);
        if !self.return_fields.is_empty() {
            line.push_str(&format!(" {{{}}}", self.return_fields.join(" ")));
        }
        line.push_str(&format!(" [{}]", self.vendor));
        line
    }

    /// One line per endpoint, description appended after ` -- `.
    pub fn render_line(&self) -> String {
        if self.description.is_empty() {
            self.head()
        } else {
            format!("{} -- {}", self.head(), self.description)
        }
    }
}

/// Compact, prompt-sized view of the schema's query endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemaDigest {
    pub entries: Vec<DigestEntry>,
}

impl SchemaDigest {
    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn entry(&self, name: &str) -> Option<&DigestEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Digest limited to the given endpoint names, order preserved.
    pub fn subset(&self, names: &[&str]) -> SchemaDigest {
        SchemaDigest {
            entries: self
                .entries
                .iter()
                .filter(|e| names.contains(&e.name.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Renders one line per entry, never exceeding [`DIGEST_BYTE_LIMIT`].
    /// Descriptions are shortened first, then dropped, if the full text
    /// would not fit.
    pub fn render(&self) -> String {
        let full: Vec<String> = self.entries.iter().map(DigestEntry::render_line).collect();
        let text = full.join("\n");
        if text.len() <= DIGEST_BYTE_LIMIT {
            return text;
        }
        let heads: Vec<String> = self.entries.iter().map(DigestEntry::head).collect();
        let bare = heads.join("\n");
        if bare.len() > DIGEST_BYTE_LIMIT {
            return truncate_at_char(&bare, DIGEST_BYTE_LIMIT).to_string();
        }
        // spread the remaining budget evenly over descriptions
        let spare = DIGEST_BYTE_LIMIT - bare.len();
        let per_entry = spare / self.entries.len().max(1);
        let lines: Vec<String> = self
            .entries
            .iter()
            .zip(&heads)
            .map(|(e, head)| {
                let room = per_entry.saturating_sub(4);
                if e.description.is_empty() || room < 8 {
                    head.clone()
                } else {
                    format!("{head} -- {}", truncate_at_char(&e.description, room))
                }
            })
            .collect();
        lines.join("\n")
    }
}

impl fmt::Display for SchemaDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn truncate_at_char(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    let mut end = max;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    &s[..end]
}

pub fn introspect(schema: &UnifiedSchema) -> SchemaDigest {
    let mut entries: Vec<DigestEntry> = schema
        .query_endpoints
        .iter()
        .map(|ep| DigestEntry::from_endpoint(ep, schema))
        .collect();
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    SchemaDigest { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::schema::{parse_schema, CANONICAL_ENDPOINTS};

    #[test]
    fn six_entries_alphabetical() {
        let digest = introspect(&assets::unified_schema());
        let mut expected = CANONICAL_ENDPOINTS.to_vec();
        expected.sort();
        assert_eq!(digest.names(), expected);
        let text = digest.render();
        assert!(text.len() <= DIGEST_BYTE_LIMIT);
        assert_eq!(text.lines().count(), 6);
        assert!(text.contains(
            "get_entities(application_name: String!): [Entity] {id name description cost user_id} [turbonomic]"
        ));
    }

    #[test]
    fn restricted_schema_gives_one_entry() {
        let schema = assets::unified_schema().restrict(&["get_commitment_recommendations"]);
        let digest = introspect(&schema);
        assert_eq!(digest.names(), ["get_commitment_recommendations"]);
        assert_eq!(digest.entries[0].vendor, Vendor::Apptio);
    }

    #[test]
    fn deterministic() {
        let schema = assets::unified_schema();
        assert_eq!(introspect(&schema).render(), introspect(&schema).render());
    }

    #[test]
    fn oversized_descriptions_are_cut_to_fit() {
        let long = "x".repeat(3000);
        let mut sdl = String::from("type Query {\n");
        for i in 0..6 {
            sdl.push_str(&format!("  \"{long}\"\n  ep{i}: String\n"));
        }
        sdl.push('}');
        let digest = introspect(&parse_schema(&sdl).unwrap());
        let text = digest.render();
        assert!(text.len() <= DIGEST_BYTE_LIMIT);
        for i in 0..6 {
            assert!(text.contains(&format!("ep{i}: String [unknown] -- xxx")));
        }
    }
}
