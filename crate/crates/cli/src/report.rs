//! Rendering of command results as aligned tables, JSON documents or CSV.

use serde::Serialize;
use serde_json::Value;

use crate::scenario::{Scenario, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Json,
    Csv,
}

/// Rectangular data with a fixed header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in std::iter::once(&self.header).chain(&self.rows) {
            out.push_str(&line.iter().map(|c| escape(c)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Result of one command: a key/value summary for humans, the full
/// structured result, and optionally a table of records.
#[derive(Debug, Clone)]
pub struct Output {
    pub command: &'static str,
    pub scenario: Scenario,
    pub summary: Vec<(String, String)>,
    pub result: Value,
    pub records: Option<Csv>,
}

#[derive(Serialize)]
struct Document<'a> {
    schema_version: u32,
    command: &'a str,
    scenario: &'a Scenario,
    result: &'a Value,
}

impl Output {
    pub fn new(command: &'static str, scenario: &Scenario, result: &impl Serialize) -> Self {
        Self {
            command,
            scenario: scenario.clone(),
            summary: Vec::new(),
            result: serde_json::to_value(result).expect("results serialize"),
            records: None,
        }
    }

    pub fn row(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.summary.push((key.into(), value.into()));
        self
    }

    pub fn with_records(mut self, records: Csv) -> Self {
        self.records = Some(records);
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Table => self.table(),
            Format::Json => self.json(),
            Format::Csv => self.csv(),
        }
    }

    pub fn table(&self) -> String {
        let width = self
            .summary
            .iter()
            .map(|(k, _)| k.chars().count())
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &self.summary {
            out.push_str(&format!("{k:<width$}  {v}\n"));
        }
        if let Some(records) = &self.records {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&aligned(records));
        }
        out
    }

    pub fn json(&self) -> String {
        let doc = Document {
            schema_version: SCHEMA_VERSION,
            command: self.command,
            scenario: &self.scenario,
            result: &self.result,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("documents serialize");
        s.push('\n');
        s
    }

    /// The record table if there is one, else the summary as key/value rows.
    pub fn csv(&self) -> String {
        match &self.records {
            Some(r) => r.render(),
            None => Csv {
                header: vec!["schema_version".into(), "key".into(), "value".into()],
                rows: self
                    .summary
                    .iter()
                    .map(|(k, v)| vec![SCHEMA_VERSION.to_string(), k.clone(), v.clone()])
                    .collect(),
            }
            .render(),
        }
    }
}

fn aligned(csv: &Csv) -> String {
    let cols = csv.header.len();
    let mut widths = vec![0; cols];
    for line in std::iter::once(&csv.header).chain(&csv.rows) {
        for (w, cell) in widths.iter_mut().zip(line) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for line in std::iter::once(&csv.header).chain(&csv.rows) {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:>w$}"))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Shortest round-trip form, always with a decimal point or exponent.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
