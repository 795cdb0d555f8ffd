use std::io;
use std::path::{Path, PathBuf};

use super::recommend::RecommendationRecord;
use super::session::SessionTranscript;

/// One JSON object per line, fields in declaration order, trailing newline
/// after every record.
pub fn records_to_jsonl(recs: &[RecommendationRecord]) -> String {
    let mut out = String::new();
    for r in recs {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn emit_records(recs: &[RecommendationRecord], path: &Path) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, records_to_jsonl(recs))
}

pub fn parse_jsonl(text: &str) -> Result<Vec<RecommendationRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// `20261015T093000Z` style stamp, safe in file names.
pub fn timestamp_now() -> String {
    chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string()
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersistedRun {
    pub transcript: PathBuf,
    pub records: PathBuf,
}

/// Writes `<dir>/<stamp>-<model>.json` and `<dir>/<stamp>-records.jsonl`.
pub fn persist_run(t: &SessionTranscript, dir: &Path, stamp: &str) -> io::Result<PersistedRun> {
    std::fs::create_dir_all(dir)?;
    let transcript = dir.join(format!("{stamp}-{}.json", file_safe(&t.model)));
    let records = dir.join(format!("{stamp}-records.jsonl"));
    std::fs::write(&transcript, t.to_json_pretty())?;
    emit_records(&t.recommendations, &records)?;
    Ok(PersistedRun { transcript, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::recommend::{Category, Priority};

    fn rec(i: u32) -> RecommendationRecord {
        RecommendationRecord {
            short_description: format!("r{i}"),
            description: "d".into(),
            category: Category::Placement,
            application: "OnlineBoutique".into(),
            estimated_savings: 35.0,
            priority: Priority::Low,
            source_refs: vec!["A-102".into()],
        }
    }

    #[test]
    fn round_trip() {
        let recs = vec![rec(1), rec(2), rec(3)];
        let text = records_to_jsonl(&recs);
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(r#"{"short_description":"r1","description":"d","category":"placement","#));
        let back = parse_jsonl(&text).unwrap();
        assert_eq!(back, recs);
        assert!(back.iter().all(RecommendationRecord::is_valid));
    }

    #[test]
    fn empty_file_is_created() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/out.jsonl");
        emit_records(&[], &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "");
    }

    #[test]
    fn write_failure_surfaces() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_records(&[rec(1)], dir.path()).is_err());
    }
}
