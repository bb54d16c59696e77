//! Tables with per-row verdicts, written as CSV (one file per table) or one JSON document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ReportError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    /// Non-finite floats become text so that every format can hold them.
    pub fn float(x: f64) -> Self {
        if x.is_finite() {
            Cell::Float(x)
        } else {
            Cell::Text(format!("{x}"))
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub cells: Vec<Cell>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; panics when the width does not match the header.
    pub fn push(&mut self, cells: Vec<Cell>, ok: bool) {
        assert_eq!(
            cells.len(),
            self.columns.len(),
            "row width in table {}",
            self.name
        );
        self.rows.push(Row {
            cells,
            verdict: Verdict::from_bool(ok),
        });
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict == Verdict::Pass)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.tables.iter().all(Table::passed)
    }

    pub fn failures(&self) -> Vec<(String, usize)> {
        self.tables
            .iter()
            .map(|t| {
                let n = t.rows.iter().filter(|r| r.verdict == Verdict::Fail).count();
                (t.name.clone(), n)
            })
            .filter(|x| x.1 > 0)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}`")),
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes the report under `dir` and returns the files created.
pub fn emit_report(report: &Report, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    match format {
        Format::Json => {
            let path = dir.join(format!("{}.json", report.experiment));
            let mut text = serde_json::to_string_pretty(report)?;
            text.push('\n');
            fs::write(&path, text).map_err(io(&path))?;
            Ok(vec![path])
        }
        Format::Csv => {
            let mut out = Vec::new();
            for t in &report.tables {
                let path = dir.join(format!("{}.{}.csv", report.experiment, t.name));
                let mut w = csv::Writer::from_writer(Vec::new());
                let mut header = t.columns.clone();
                header.push("verdict".into());
                w.write_record(&header)?;
                for r in &t.rows {
                    let mut rec: Vec<String> = r.cells.iter().map(Cell::render).collect();
                    rec.push(r.verdict.as_str().into());
                    w.write_record(&rec)?;
                }
                let bytes = w
                    .into_inner()
                    .map_err(|e| e.into_error())
                    .map_err(io(&path))?;
                fs::write(&path, bytes).map_err(io(&path))?;
                out.push(path);
            }
            Ok(out)
        }
    }
}
