//! CSV and JSON emission with stable column order and floats rounded to
//! six significant digits.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metrics::{Metrics, Value};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Round to six significant digits.
pub fn round6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// One report row: extra leading columns followed by the metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub cells: Vec<(String, Value)>,
}

impl Row {
    pub fn from_metrics(prefix: Vec<(String, Value)>, metrics: &Metrics) -> Row {
        let mut cells = prefix;
        cells.extend(metrics.fields().into_iter().map(|(k, v)| (k.to_string(), v)));
        Row { cells }
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Int(n) => n.to_string(),
        Value::Float(Some(x)) => round6(*x).to_string(),
        Value::Float(None) => String::new(),
        Value::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::Text(s) => s.clone(),
    }
}

fn json_cell(v: &Value) -> serde_json::Value {
    match v {
        Value::Int(n) => (*n).into(),
        Value::Float(Some(x)) => serde_json::Number::from_f64(round6(*x)).map_or(serde_json::Value::Null, Into::into),
        Value::Float(None) => serde_json::Value::Null,
        Value::Text(s) => s.clone().into(),
    }
}

/// `header` is used when `rows` is empty.
pub fn render_csv(header: &[String], rows: &[Row]) -> String {
    let mut out = String::new();
    let names: Vec<&str> = match rows.first() {
        Some(r) => r.cells.iter().map(|(k, _)| k.as_str()).collect(),
        None => header.iter().map(String::as_str).collect(),
    };
    out.push_str(&names.join(","));
    out.push('\n');
    for r in rows {
        let line: Vec<String> = r.cells.iter().map(|(_, v)| csv_cell(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn render_json(rows: &[Row]) -> String {
    let array: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            serde_json::Value::Object(r.cells.iter().map(|(k, v)| (k.clone(), json_cell(v))).collect())
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&array).expect("json serializes");
    text.push('\n');
    text
}

pub fn render(format: Format, header: &[String], rows: &[Row]) -> String {
    match format {
        Format::Csv => render_csv(header, rows),
        Format::Json => render_json(rows),
    }
}

pub fn metrics_header() -> Vec<String> {
    Metrics::default().fields().into_iter().map(|(k, _)| k.to_string()).collect()
}

pub fn emit_report(format: Format, header: &[String], rows: &[Row], path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(render(format, header, rows).as_bytes())?;
    f.flush()
}
