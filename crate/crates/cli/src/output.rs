//! Tabular output with an embedded metadata header.
//!
//! CSV files start with `# key: value` comment lines; JSON documents carry a
//! `metadata` object next to the table. Floats are written in shortest
//! round-trip form, so identical inputs give identical bytes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::OutputFormat;
use crate::error::CliError;

pub const TOOL: &str = "csl-bounds";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Command-specific entries, in insertion order.
    #[serde(skip)]
    pub extra: Vec<(String, Value)>,
}

impl Metadata {
    pub fn new(command: &str, config_sha256: String, seed: u64) -> Self {
        Metadata {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            config_sha256,
            seed,
            extra: Vec::new(),
        }
    }

    pub fn with<V: Serialize>(mut self, key: &str, value: V) -> Self {
        self.extra.push((
            key.to_string(),
            serde_json::to_value(value).expect("metadata value serialises"),
        ));
        self
    }

    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("metadata serialises");
        let map = v.as_object_mut().expect("object");
        for (k, x) in &self.extra {
            map.insert(k.clone(), x.clone());
        }
        v
    }

    fn csv_header(&self) -> String {
        let mut out = format!(
            "# tool: {}\n# version: {}\n# command: {}\n# config_sha256: {}\n# seed: {}\n",
            self.tool, self.version, self.command, self.config_sha256, self.seed
        );
        for (k, v) in &self.extra {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    B(bool),
    S(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:e}"),
            Cell::B(b) => b.to_string(),
            Cell::S(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(x) => json!(x),
            Cell::B(b) => json!(b),
            Cell::S(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::B(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::S(s.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn render(&self, meta: &Metadata, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => {
                let mut out = meta.csv_header();
                out.push_str(&self.columns.join(","));
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out
            }
            OutputFormat::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
                    .collect();
                let doc = json!({
                    "metadata": meta.to_json(),
                    "columns": self.columns,
                    "rows": rows,
                });
                let mut s = serde_json::to_string_pretty(&doc).expect("table serialises");
                s.push('\n');
                s
            }
        }
    }
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            std::fs::write(p, text).map_err(|e| CliError::io(p, e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}
