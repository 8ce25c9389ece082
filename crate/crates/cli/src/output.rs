//! Table emission. Numbers are written in lowercase scientific notation
//! with 9 significant digits (`{:.8e}`), so identical runs give identical
//! bytes. Every file starts with a header recording the resolved
//! configuration: `#` comment lines for CSV, a `header` object for JSON.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub const UNITS: &str = "frequencies and rates in units of 1e8 Hz; intensities in units of Omega^2, \
                         Omega_j = sqrt(s_j * I_j) with s_j = constants.intensity_scale{j}";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub fn fmt_num(v: f64) -> String {
    format!("{v:.8e}")
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => u8::from(*b).to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // Round through the fixed-width text so JSON carries the same
            // digits as CSV; non-finite values become null.
            Cell::Num(v) => fmt_num(*v)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map_or(Value::Null, Value::Number),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// What the table holds, recorded in the header.
    pub title: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(title: impl Into<String>, columns: &[&'static str]) -> Self {
        Self {
            title: title.into(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

const OMITTED: [&str; 2] = ["threads", "output_dir"];

/// Settings that change results; `threads` and `output_dir` are left out so
/// that the same physics gives the same bytes.
pub fn header_toml(cfg: &RunConfig) -> String {
    let mut v = toml::Value::try_from(cfg).expect("configuration serializes");
    if let Some(t) = v.as_table_mut() {
        for k in OMITTED {
            t.remove(k);
        }
    }
    toml::to_string(&v).expect("configuration serializes")
}

fn header_json(cfg: &RunConfig) -> Value {
    let mut v = serde_json::to_value(cfg).expect("configuration serializes");
    if let Some(t) = v.as_object_mut() {
        for k in OMITTED {
            t.remove(k);
        }
    }
    v
}

pub fn render_csv(table: &Table, cfg: &RunConfig) -> String {
    let mut s = String::new();
    s.push_str(&format!("# lambda-ob {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("# {}\n", table.title));
    s.push_str(&format!("# units: {UNITS}\n"));
    s.push_str("# numbers: 9 significant digits, scientific notation\n");
    s.push_str("# config (threads and output_dir omitted):\n");
    for line in header_toml(cfg).lines() {
        if line.is_empty() {
            s.push_str("#\n");
        } else {
            s.push_str(&format!("#   {line}\n"));
        }
    }
    s.push_str(&table.columns.join(","));
    s.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(Cell::csv).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn render_json(table: &Table, cfg: &RunConfig) -> String {
    let config = header_json(cfg);
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
        .collect();
    let doc = json!({
        "header": {
            "generator": format!("lambda-ob {}", env!("CARGO_PKG_VERSION")),
            "title": table.title,
            "units": UNITS,
            "config": config,
        },
        "columns": table.columns,
        "rows": rows,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("json serializes");
    s.push('\n');
    s
}

/// Writes the files of one command. Each file goes through a temporary file
/// renamed into place; if the command fails or the writer is dropped
/// without [`OutputWriter::finish`], files already written are removed.
pub struct OutputWriter {
    dir: PathBuf,
    format: Format,
    written: Vec<PathBuf>,
    done: bool,
}

impl OutputWriter {
    pub fn new(dir: &Path, format: Format) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            written: Vec::new(),
            done: false,
        })
    }

    /// Writes `table` as `<stem>.csv` or `<stem>.json`.
    pub fn write(&mut self, stem: &str, table: &Table, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        let (ext, body) = match self.format {
            Format::Csv => ("csv", render_csv(table, cfg)),
            Format::Json => ("json", render_json(table, cfg)),
        };
        let path = self.dir.join(format!("{stem}.{ext}"));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(body.as_bytes())?;
        tmp.flush()?;
        tmp.persist(&path).map_err(|e| CliError::Io(e.error))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn finish(mut self) -> Vec<PathBuf> {
        self.done = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputWriter {
    fn drop(&mut self) {
        if !self.done {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}
