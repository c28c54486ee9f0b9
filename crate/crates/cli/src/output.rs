use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(v) => {
                if v.contains([',', '"', '\n']) {
                    format!("\"{}\"", v.replace('"', "\"\""))
                } else {
                    v.clone()
                }
            }
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::from(*v),
            Cell::Text(v) => Value::from(v.as_str()),
        }
    }
}

/// Row-oriented dataset with a fixed column order.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Table {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = self.columns.join(",");
                out.push('\n');
                for row in &self.rows {
                    let line: Vec<String> = row.iter().map(Cell::csv).collect();
                    let _ = writeln!(out, "{}", line.join(","));
                }
                out
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> = self
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| (c.to_string(), v.json()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                to_json(&rows)
            }
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

/// Everything needed to reproduce one output file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    /// Seconds since the Unix epoch; taken from `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
    pub command_line: Vec<String>,
    pub outputs: Vec<String>,
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

/// Where results go: stdout, or a directory of files with manifests.
pub struct Sink {
    pub out: Option<PathBuf>,
    pub command_line: Vec<String>,
}

impl Sink {
    /// Writes `content` as `<stem>.<ext>` plus `<stem>.manifest.json`, or
    /// prints it when no output directory was given.
    pub fn emit(
        &self,
        subcommand: &str,
        stem: &str,
        format: Format,
        content: &str,
        parameters: Value,
        seed: Option<u64>,
    ) -> Result<(), CliError> {
        let Some(dir) = &self.out else {
            print!("{content}");
            return Ok(());
        };
        fs::create_dir_all(dir)?;
        let data = dir.join(format!("{stem}.{}", format.extension()));
        fs::write(&data, content)?;
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            parameters,
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            timestamp: timestamp(),
            command_line: self.command_line.clone(),
            outputs: vec![file_name(&data)],
        };
        let manifest_path = dir.join(format!("{stem}.manifest.json"));
        fs::write(&manifest_path, to_json(&manifest))?;
        eprintln!("wrote {} and {}", data.display(), manifest_path.display());
        Ok(())
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_cells() {
        let mut t = Table::new(&["x", "n", "ok", "name"]);
        t.push(vec![Cell::Float(0.1), Cell::Int(3), Cell::Bool(true), Cell::Text("a,b".into())]);
        assert_eq!(t.render(Format::Csv), "x,n,ok,name\n1.0000000000000001e-1,3,true,\"a,b\"\n");
    }

    #[test]
    fn nan_becomes_null_in_json() {
        let mut t = Table::new(&["I"]);
        t.push(vec![Cell::Float(f64::NAN)]);
        assert!(t.render(Format::Json).contains("null"));
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.718281828459045e-300, 6.02214076e23] {
            let s = Cell::Float(v).csv();
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
