//! Report documents and delimited surface files, written atomically.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Flag(bool),
}

impl Cell {
    fn render(self) -> String {
        match self {
            // 17 significant digits round-trip every f64
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Flag(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

/// Plot-ready samples; `rows[r].len() == columns.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

/// `scenario`, `results` and `artifacts` are reproducible; `timing` is not.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: Value,
    pub results: Value,
    pub artifacts: Vec<Artifact>,
    pub timing: Timing,
}

impl RunReport {
    pub fn comparable(&self) -> Value {
        serde_json::json!({
            "scenario": self.scenario,
            "results": self.results,
            "artifacts": self.artifacts,
        })
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn csv_bytes<I, R>(rows: I) -> Result<Vec<u8>, CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

pub fn write_table(dir: &Path, stem: &str, table: &Table) -> Result<Artifact, CliError> {
    let file = format!("{stem}.{}.csv", table.name);
    let header = std::iter::once(table.columns.iter().map(|c| c.to_string()).collect::<Vec<_>>());
    let body = table.rows.iter().map(|r| r.iter().map(|c| c.render()).collect::<Vec<_>>());
    write_atomic(&dir.join(&file), &csv_bytes(header.chain(body))?)?;
    Ok(Artifact { file, columns: table.columns.iter().map(|c| c.to_string()).collect(), rows: table.rows.len() })
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<[String; 2]>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Value::String(s) => out.push([prefix.to_string(), s.clone()]),
        Value::Null => out.push([prefix.to_string(), String::new()]),
        other => out.push([prefix.to_string(), other.to_string()]),
    }
}

/// Flattened `key,value` rows of a JSON document.
pub fn flatten_report(v: &Value) -> Vec<[String; 2]> {
    let mut out = Vec::new();
    flatten("", v, &mut out);
    out
}

pub fn write_report(dir: &Path, stem: &str, format: Format, report: &RunReport) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{stem}.report.{}", format.extension()));
    let value = serde_json::to_value(report).map_err(|e| CliError::Internal(e.to_string()))?;
    let bytes = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&value).map_err(|e| CliError::Internal(e.to_string()))?;
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let rows = std::iter::once(["key".to_string(), "value".to_string()]).chain(flatten_report(&value));
            csv_bytes(rows)?
        }
    };
    write_atomic(&path, &bytes)?;
    Ok(path)
}
