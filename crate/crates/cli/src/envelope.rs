//! Report envelope (JSON) and tabular payloads (CSV).
//!
//! CSV payloads carry no timings or paths, so identical configs give identical bytes.
//! Floats use Rust's shortest round-trip formatting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:?}"),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}
impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::I(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::S(v.to_string())
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

/// Fixed columns, one row per sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.headers.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| CliError::Serialize(e.to_string());
        w.write_record(&self.headers).map_err(ser)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(ser)?;
        }
        w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))
    }
}

/// One acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    /// Human-readable condition, e.g. `<= 0.02`.
    pub condition: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Gate {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!("<= {limit:?}"), value <= limit)
    }
    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!(">= {limit:?}"), value >= limit)
    }
    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(name, value, format!("in [{lo:?}, {hi:?}]"), value >= lo && value <= hi)
    }
    pub fn new(name: &str, value: f64, condition: String, pass: bool) -> Self {
        Self {
            name: name.to_string(),
            value,
            condition,
            pass,
            note: None,
        }
    }
    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Result of one experiment before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub results: serde_json::Value,
    pub tables: Vec<Table>,
    pub gates: Vec<Gate>,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }
    pub fn gate(&self, name: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.name == name)
    }
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Serialize)]
pub struct Envelope<'a> {
    pub experiment: &'a str,
    pub config: &'a ExperimentConfig,
    pub results: &'a serde_json::Value,
    pub gates: &'a [Gate],
    pub pass: bool,
    pub warnings: &'a [String],
    /// CSV files written next to the envelope.
    pub payloads: Vec<String>,
    pub timings: Timings,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Timings {
    pub wall_seconds: f64,
}

/// Writes `<name>.json`, `<name>.config.toml` and one CSV per table into `dir`.
pub fn write_report(
    dir: &Path,
    name: &str,
    config: &ExperimentConfig,
    outcome: &Outcome,
    timings: Timings,
) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut payloads = Vec::new();
    for t in &outcome.tables {
        let file = if t.name == name {
            format!("{name}.csv")
        } else {
            format!("{name}.{}.csv", t.name)
        };
        write_file(&dir.join(&file), &t.to_csv()?)?;
        payloads.push(file);
    }
    write_file(
        &dir.join(format!("{name}.config.toml")),
        config.to_toml_string()?.as_bytes(),
    )?;
    let env = Envelope {
        experiment: name,
        config,
        results: &outcome.results,
        gates: &outcome.gates,
        pass: outcome.pass(),
        warnings: &outcome.warnings,
        payloads,
        timings,
    };
    let json = serde_json::to_vec_pretty(&env).map_err(|e| CliError::Serialize(e.to_string()))?;
    let path = dir.join(format!("{name}.json"));
    write_file(&path, &json)?;
    Ok(path)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_shortest_round_trip() {
        let mut t = Table::new("x", &["a", "b", "c"]);
        t.push(vec![0.1.into(), 3usize.into(), "q,r".into()]);
        t.push(vec![1e-20.into(), (-0.0).into(), f64::INFINITY.into()]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "a,b,c\n0.1,3,\"q,r\"\n1e-20,-0.0,inf\n");
        let back: f64 = "0.30000000000000004".parse().unwrap();
        assert_eq!(Cell::F(0.1 + 0.2).render().parse::<f64>().unwrap(), back);
    }

    #[test]
    fn gates() {
        assert!(Gate::at_most("r", 0.01, 0.02).pass);
        assert!(!Gate::at_least("o", 1.0, 1.5).pass);
        assert!(Gate::within("s", 1.0, 0.5, 1.5).pass);
        assert!(!Gate::within("s", f64::NAN, 0.5, 1.5).pass);
    }
}
