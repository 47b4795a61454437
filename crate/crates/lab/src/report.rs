//! Checks, reports and CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// How a measured value is compared with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Passes when `value < tolerance`.
    Below,
    /// Passes when `value > tolerance`.
    Above,
    /// Passes when `value == tolerance`.
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// `null` in JSON when the computation behind the check failed.
    pub value: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
    pub paper_tag: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    pub fn new(name: &str, paper_tag: &str, value: f64, tolerance: f64, relation: Relation) -> Self {
        let pass = match relation {
            Relation::Below => value < tolerance,
            Relation::Above => value > tolerance,
            Relation::Equal => value == tolerance,
        };
        Check {
            name: name.to_string(),
            value,
            tolerance,
            relation,
            pass,
            paper_tag: paper_tag.to_string(),
            error: None,
        }
    }

    pub fn below(name: &str, paper_tag: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, paper_tag, value, tolerance, Relation::Below)
    }

    pub fn above(name: &str, paper_tag: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, paper_tag, value, tolerance, Relation::Above)
    }

    /// A boolean outcome recorded as `1` against an expected `1`.
    pub fn holds(name: &str, paper_tag: &str, ok: bool) -> Self {
        Self::new(name, paper_tag, if ok { 1.0 } else { 0.0 }, 1.0, Relation::Equal)
    }

    /// A check whose computation returned an error.
    pub fn failed(name: &str, paper_tag: &str, tolerance: f64, relation: Relation, err: impl std::fmt::Display) -> Self {
        Check {
            name: name.to_string(),
            value: f64::NAN,
            tolerance,
            relation,
            pass: false,
            paper_tag: paper_tag.to_string(),
            error: Some(err.to_string()),
        }
    }
}

/// Rows destined for one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(file_name: &str, headers: &[&str]) -> Self {
        Table {
            file_name: file_name.to_string(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(&self.file_name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format_number(*x)))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_number(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:e}")
    }
}

/// What a scenario produces before it is wrapped into a report.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub diagnostics: BTreeMap<String, Value>,
}

impl Outcome {
    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.diagnostics.insert(key.to_string(), value.into());
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub paper_tag: String,
    pub version: String,
    pub pass: bool,
    pub config: Value,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, Value>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Only field that differs between identical runs.
    pub wall_time_s: f64,
}

impl Report {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("report.json");
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
    }
}
