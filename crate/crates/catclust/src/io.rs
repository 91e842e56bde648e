//! Reading and writing panels of categorical series.
//!
//! CSV holds one series per line as comma-separated states. JSONL holds one
//! object per line with a `states` array. States are 1-based.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use catclust_core::model::CategoricalPanel;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// `.jsonl` and `.json` files are JSON lines, anything else CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(Error::Config(format!("unknown data format `{other}` (expected csv or jsonl)"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonSeries {
    states: Vec<i64>,
}

fn check_state(v: i64, k: usize, name: &str, line: usize) -> Result<u32> {
    if v < 1 || v > k as i64 {
        return Err(Error::Parse { path: name.into(), line, msg: format!("state {v} outside 1..={k}") });
    }
    Ok(v as u32)
}

/// Parses CSV text; `name` labels error messages.
pub fn parse_csv(text: &str, k: usize, name: &str) -> Result<Vec<Vec<u32>>> {
    let mut series = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let states = raw
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                let v: i64 = tok
                    .parse()
                    .map_err(|_| Error::Parse { path: name.into(), line, msg: format!("`{tok}` is not an integer") })?;
                check_state(v, k, name, line)
            })
            .collect::<Result<Vec<_>>>()?;
        series.push(states);
    }
    Ok(series)
}

/// Parses JSON-lines text; `name` labels error messages.
pub fn parse_jsonl(text: &str, k: usize, name: &str) -> Result<Vec<Vec<u32>>> {
    let mut series = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let obj: JsonSeries = serde_json::from_str(raw)
            .map_err(|e| Error::Parse { path: name.into(), line, msg: e.to_string() })?;
        let states = obj.states.iter().map(|&v| check_state(v, k, name, line)).collect::<Result<Vec<_>>>()?;
        series.push(states);
    }
    Ok(series)
}

/// Parses text in `format` into a validated panel with `k` states.
pub fn parse(text: &str, format: Format, k: usize, name: &str) -> Result<CategoricalPanel> {
    let series = match format {
        Format::Csv => parse_csv(text, k, name)?,
        Format::Jsonl => parse_jsonl(text, k, name)?,
    };
    if series.is_empty() {
        return Err(Error::Input(format!("{name}: no series found")));
    }
    if let Some(i) = series.iter().position(Vec::is_empty) {
        return Err(Error::Input(format!("{name}: series {} is empty", i + 1)));
    }
    Ok(CategoricalPanel::new(series, k)?)
}

pub fn ingest(path: &Path, format: Format, k: usize) -> Result<CategoricalPanel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, format, k, &path.display().to_string())
}

pub fn emit(panel: &CategoricalPanel, format: Format, mut out: impl Write) -> std::io::Result<()> {
    for series in panel.all_series() {
        match format {
            Format::Csv => {
                let line: Vec<String> = series.iter().map(u32::to_string).collect();
                writeln!(out, "{}", line.join(","))?;
            }
            Format::Jsonl => {
                let obj = JsonSeries { states: series.iter().map(|&v| v as i64).collect() };
                writeln!(out, "{}", serde_json::to_string(&obj).map_err(std::io::Error::other)?)?;
            }
        }
    }
    Ok(())
}
