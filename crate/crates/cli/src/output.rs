use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rtr_core::report::{csv_f64, round_json};
use serde_json::{Map, Value};

use crate::Format;

/// One CSV cell.
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(x) => csv_f64(*x),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

/// A report in both renderings. `config` is echoed by either one.
pub struct Report {
    pub config: Value,
    pub body: Map<String, Value>,
    pub table: Table,
}

impl Table {
    pub fn new(header: &[&str], rows: Vec<Vec<Cell>>) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows }
    }
}

impl Report {
    pub fn json(&self) -> Value {
        let mut map = Map::new();
        map.insert("config".into(), self.config.clone());
        map.extend(self.body.clone());
        round_json(Value::Object(map))
    }

    /// Header row preceded by a `#` line echoing the configuration.
    pub fn csv(&self) -> String {
        let mut out = format!("# {}\n", config_line(&self.config));
        out.push_str(&self.table.header.join(","));
        out.push('\n');
        for row in &self.table.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json()).expect("JSON values serialize");
                s.push('\n');
                s
            }
            Format::Csv => self.csv(),
        }
    }
}

fn config_line(config: &Value) -> String {
    match round_json(config.clone()) {
        Value::Object(map) => map
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k}={s}"),
                other => format!("{k}={other}"),
            })
            .collect::<Vec<_>>()
            .join(" "),
        other => other.to_string(),
    }
}

pub fn write(text: &str, out: Option<&Path>) -> io::Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(text.as_bytes())?;
            w.flush()
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()
        }
    }
}
