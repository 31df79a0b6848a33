//! Machine-readable verification reports with deterministic CSV and JSON
//! renderings.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::error::Result;

/// One cell of a report row.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl FieldValue {
    fn csv(&self) -> String {
        match self {
            FieldValue::Int(v) => format!("{}", v),
            FieldValue::Float(v) => format!("{}", v),
            FieldValue::Text(v) => v.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            FieldValue::Int(v) => json!(v),
            FieldValue::Float(v) => json!(v),
            FieldValue::Text(v) => json!(v),
        }
    }
}

impl From<i64> for FieldValue {
    fn from(v: i64) -> Self {
        FieldValue::Int(v)
    }
}

impl From<usize> for FieldValue {
    fn from(v: usize) -> Self {
        FieldValue::Int(v as i64)
    }
}

impl From<f64> for FieldValue {
    fn from(v: f64) -> Self {
        FieldValue::Float(v)
    }
}

impl From<&str> for FieldValue {
    fn from(v: &str) -> Self {
        FieldValue::Text(v.to_string())
    }
}

impl From<String> for FieldValue {
    fn from(v: String) -> Self {
        FieldValue::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Pass,
    Fail,
    /// Check not applicable; the reason is recorded and the row does not
    /// count against the overall status.
    Skipped(String),
}

impl RowStatus {
    fn csv(&self) -> String {
        match self {
            RowStatus::Pass => "pass".into(),
            RowStatus::Fail => "fail".into(),
            RowStatus::Skipped(reason) => format!("skipped: {}", reason),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub values: Vec<FieldValue>,
    pub status: RowStatus,
}

/// Configuration echo and versioning carried by every report.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// Resolved configuration as sorted key/value pairs.
    pub config: Vec<(String, String)>,
}

/// Structured result of one verification check.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub check: String,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// Measured constants in insertion order.
    pub constants: Vec<(String, f64)>,
    pub provenance: Provenance,
}

impl VerificationReport {
    pub fn new(check: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            check: check.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            constants: Vec::new(),
            provenance: Provenance::default(),
        }
    }

    pub fn push_row(&mut self, values: Vec<FieldValue>, status: RowStatus) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(ReportRow { values, status });
    }

    pub fn set_constant(&mut self, name: impl Into<String>, value: f64) {
        self.constants.push((name.into(), value));
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    /// Pass iff every row passes or is explicitly skipped.
    pub fn overall_pass(&self) -> bool {
        self.rows
            .iter()
            .all(|r| !matches!(r.status, RowStatus::Fail))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# check = {}\n", self.check));
        out.push_str(&format!("# version = {}\n", self.provenance.version));
        out.push_str(&format!("# command = {}\n", self.provenance.command));
        if let Some(seed) = self.provenance.seed {
            out.push_str(&format!("# seed = {}\n", seed));
        }
        for (k, v) in &self.provenance.config {
            out.push_str(&format!("# config {} = {}\n", k, v));
        }
        for (k, v) in &self.constants {
            out.push_str(&format!("# constant {} = {}\n", k, v));
        }
        out.push_str(&format!(
            "# overall = {}\n",
            if self.overall_pass() { "pass" } else { "fail" }
        ));
        out.push_str(&self.columns.join(","));
        out.push_str(",status\n");
        for row in &self.rows {
            let mut cells: Vec<String> = row.values.iter().map(|v| v.csv()).collect();
            cells.push(row.status.csv());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut meta = Map::new();
        meta.insert("check".into(), json!(self.check));
        meta.insert("version".into(), json!(self.provenance.version));
        meta.insert("command".into(), json!(self.provenance.command));
        if let Some(seed) = self.provenance.seed {
            meta.insert("seed".into(), json!(seed));
        }
        let mut config = Map::new();
        for (k, v) in &self.provenance.config {
            config.insert(k.clone(), json!(v));
        }
        meta.insert("config".into(), Value::Object(config));
        let mut constants = Map::new();
        for (k, v) in &self.constants {
            constants.insert(k.clone(), json!(v));
        }
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (col, val) in self.columns.iter().zip(&row.values) {
                    obj.insert(col.clone(), val.json());
                }
                obj.insert("status".into(), json!(row.status.csv()));
                Value::Object(obj)
            })
            .collect();
        json!({
            "metadata": Value::Object(meta),
            "constants": Value::Object(constants),
            "columns": self.columns,
            "rows": rows,
            "overall": if self.overall_pass() { "pass" } else { "fail" },
        })
    }

    pub fn write_to(&self, out: &mut dyn Write, format: ReportFormat) -> Result<()> {
        match format {
            ReportFormat::Csv => out.write_all(self.to_csv().as_bytes())?,
            ReportFormat::Json => {
                serde_json::to_writer_pretty(&mut *out, &self.to_json())
                    .map_err(|e| crate::error::Error::Config(e.to_string()))?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}
