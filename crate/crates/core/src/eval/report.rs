use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{MetricsRow, MetricsTable, LOW_N_THRESHOLD};

pub const COLUMNS: [&str; 9] = [
    "Model",
    "Execution Time (seconds)",
    "Computational Efficiency (Iterations)",
    "Planning Accuracy",
    "Plan Execution Accuracy",
    "Task Completion Rate",
    "Tool Recognition Latency",
    "Data Consolidation Accuracy",
    "Recommendation Accuracy",
];

pub const NEVER: &str = "never";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("CsvError: {0}")]
    Csv(#[from] csv::Error),
    #[error("CsvError: {0}")]
    Value(String),
    #[error("IoError: {0}")]
    Io(#[from] io::Error),
}

fn int(x: f64) -> i64 {
    x.round() as i64
}

/// The nine display cells of a row, in column order.
pub fn row_cells(row: &MetricsRow) -> [String; 9] {
    let pct = |x: f64| format!("{}%", int(x));
    [
        row.backend.clone(),
        int(row.execution_time_s).to_string(),
        int(row.iterations).to_string(),
        pct(row.planning_accuracy),
        pct(row.plan_execution_accuracy),
        pct(row.task_completion_rate),
        row.tool_recognition_latency
            .map(|l| int(l).to_string())
            .unwrap_or_else(|| NEVER.into()),
        pct(row.data_consolidation_accuracy),
        pct(row.recommendation_accuracy),
    ]
}

fn md_line<S: AsRef<str>>(cells: &[S]) -> String {
    let mut s = String::from("|");
    for c in cells {
        s.push(' ');
        s.push_str(&c.as_ref().replace('|', "\\|"));
        s.push_str(" |");
    }
    s.push('\n');
    s
}

pub fn render_markdown(table: &MetricsTable) -> String {
    let mut out = md_line(&COLUMNS);
    out.push_str(&md_line(&["---"; 9]));
    for row in &table.rows {
        out.push_str(&md_line(&row_cells(row)));
    }
    let notes: Vec<String> = table
        .rows
        .iter()
        .flat_map(|r| {
            let mut n = Vec::new();
            if r.incomplete {
                n.push(format!("- {}: incomplete, stopped after {} runs", r.backend, r.runs));
            }
            if r.low_n() {
                n.push(format!("- {}: low N ({} runs, fewer than {LOW_N_THRESHOLD})", r.backend, r.runs));
            }
            n
        })
        .collect();
    if !notes.is_empty() {
        out.push('\n');
        for n in notes {
            out.push_str(&n);
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    model: String,
    execution_time_s: i64,
    iterations: i64,
    planning_accuracy: i64,
    plan_execution_accuracy: i64,
    task_completion_rate: i64,
    tool_recognition_latency: String,
    data_consolidation_accuracy: i64,
    recommendation_accuracy: i64,
    runs: usize,
    incomplete: bool,
}

pub const CSV_HEADER: &str = "model,execution_time_s,iterations,planning_accuracy,plan_execution_accuracy,task_completion_rate,tool_recognition_latency,data_consolidation_accuracy,recommendation_accuracy,runs,incomplete";

/// Integer seconds, integer percentages.
pub fn render_csv(table: &MetricsTable) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in &table.rows {
        w.serialize(CsvRow {
            model: r.backend.clone(),
            execution_time_s: int(r.execution_time_s),
            iterations: int(r.iterations),
            planning_accuracy: int(r.planning_accuracy),
            plan_execution_accuracy: int(r.plan_execution_accuracy),
            task_completion_rate: int(r.task_completion_rate),
            tool_recognition_latency: r
                .tool_recognition_latency
                .map(|l| int(l).to_string())
                .unwrap_or_else(|| NEVER.into()),
            data_consolidation_accuracy: int(r.data_consolidation_accuracy),
            recommendation_accuracy: int(r.recommendation_accuracy),
            runs: r.runs,
            incomplete: r.incomplete,
        })
        .expect("in-memory csv write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8");
    format!("{CSV_HEADER}\n{body}")
}

pub fn parse_csv(text: &str) -> Result<MetricsTable, ReportError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if headers != CSV_HEADER {
        return Err(ReportError::Value(format!("unexpected header `{headers}`")));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize::<CsvRow>() {
        let c = rec?;
        let latency = match c.tool_recognition_latency.as_str() {
            NEVER => None,
            s => Some(
                s.parse::<i64>()
                    .map_err(|_| ReportError::Value(format!("bad latency `{s}`")))? as f64,
            ),
        };
        rows.push(MetricsRow {
            backend: c.model,
            execution_time_s: c.execution_time_s as f64,
            iterations: c.iterations as f64,
            planning_accuracy: c.planning_accuracy as f64,
            plan_execution_accuracy: c.plan_execution_accuracy as f64,
            task_completion_rate: c.task_completion_rate as f64,
            tool_recognition_latency: latency,
            data_consolidation_accuracy: c.data_consolidation_accuracy as f64,
            recommendation_accuracy: c.recommendation_accuracy as f64,
            runs: c.runs,
            incomplete: c.incomplete,
        });
    }
    Ok(MetricsTable { rows })
}

impl MetricsTable {
    /// Values at report precision, i.e. what survives a CSV round trip.
    pub fn rounded(&self) -> MetricsTable {
        let r = |x: f64| int(x) as f64;
        MetricsTable {
            rows: self
                .rows
                .iter()
                .map(|m| MetricsRow {
                    execution_time_s: r(m.execution_time_s),
                    iterations: r(m.iterations),
                    planning_accuracy: r(m.planning_accuracy),
                    plan_execution_accuracy: r(m.plan_execution_accuracy),
                    task_completion_rate: r(m.task_completion_rate),
                    tool_recognition_latency: m.tool_recognition_latency.map(r),
                    data_consolidation_accuracy: r(m.data_consolidation_accuracy),
                    recommendation_accuracy: r(m.recommendation_accuracy),
                    ..m.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub markdown: PathBuf,
    pub csv: PathBuf,
}

/// Writes `report.md` and `report.csv` into `dir`.
pub fn write_report(table: &MetricsTable, dir: &Path) -> Result<ReportPaths, ReportError> {
    std::fs::create_dir_all(dir)?;
    let paths = ReportPaths {
        markdown: dir.join("report.md"),
        csv: dir.join("report.csv"),
    };
    std::fs::write(&paths.markdown, render_markdown(table))?;
    std::fs::write(&paths.csv, render_csv(table))?;
    Ok(paths)
}
