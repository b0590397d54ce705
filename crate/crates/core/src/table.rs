//! Rectangular result tables with a provenance header, written as CSV or JSON.

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
    /// Estimate exists but its uncertainty could not be computed.
    Insufficient,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Self::Text(s.into())
    }

    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Self::Insufficient, Self::Num)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Num(v) => Some(*v),
            Self::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Self::Num(v) => format_number(*v),
            Self::Int(v) => v.to_string(),
            Self::Text(s) => s.clone(),
            Self::Empty => String::new(),
            Self::Insufficient => "insufficient".into(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Self::Num(v) if v.is_finite() => json!(v),
            Self::Num(v) => json!(format_number(*v)),
            Self::Int(v) => json!(v),
            Self::Text(s) => json!(s),
            Self::Empty => Value::Null,
            Self::Insufficient => json!("insufficient"),
        }
    }
}

/// Shortest round-trip representation; scientific outside `[1e-4, 1e15)`.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub command: String,
    pub scenario: String,
    pub scenario_sha256: String,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub tool_version: String,
    /// Free-form `key: value` notes appended to the header.
    pub notes: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &str, scenario: &crate::scenario::Scenario) -> Self {
        Self {
            command: command.into(),
            scenario: scenario.name.clone(),
            scenario_sha256: scenario.hash(),
            seed: None,
            trials: None,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            notes: Vec::new(),
        }
    }

    fn lines(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("tool".into(), format!("ris-fso {}", self.tool_version)),
            ("command".into(), self.command.clone()),
            ("scenario".into(), self.scenario.clone()),
            ("scenario_sha256".into(), self.scenario_sha256.clone()),
        ];
        if let Some(s) = self.seed {
            out.push(("seed".into(), s.to_string()));
        }
        if let Some(t) = self.trials {
            out.push(("trials".into(), t.to_string()));
        }
        out.extend(self.notes.iter().cloned());
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
    pub provenance: Provenance,
}

impl ResultTable {
    pub fn new(columns: &[&str], provenance: Provenance) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            provenance,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.provenance.notes.push((key.into(), value.into()));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.provenance.lines() {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))
                .expect("in-memory write");
        }
        let body = w.into_inner().expect("in-memory flush");
        out.push_str(std::str::from_utf8(&body).expect("utf-8 cells"));
        out
    }

    pub fn to_json(&self) -> String {
        let header: serde_json::Map<String, Value> = self
            .provenance
            .lines()
            .into_iter()
            .map(|(k, v)| (k, json!(v)))
            .collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
            .collect();
        let doc = json!({ "provenance": header, "columns": self.columns, "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc).expect("json serializes");
        s.push('\n');
        s
    }
}
