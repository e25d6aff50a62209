use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{HarnessError, Result};
use crate::manifest::RunManifest;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A CSV table written as `<name>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::new(crate::error::ErrorKind::Io, e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// What a command produced.
pub struct Outcome {
    pub manifest: RunManifest,
    pub result: Value,
    pub tables: Vec<Table>,
    /// Set when a check or suite failed; the process then exits with 1.
    pub failed: bool,
    /// Wall-clock seconds per check, written next to the report only.
    pub timings: Option<BTreeMap<String, f64>>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    manifest: &'a RunManifest,
    result: &'a Value,
}

/// Writes the outcome and returns what goes to stdout.
pub fn emit(mut outcome: Outcome, format: Format, out_dir: Option<&Path>) -> Result<(String, bool)> {
    if out_dir.is_some() {
        let mut outputs = vec!["manifest.json".to_string()];
        if format == Format::Json {
            outputs.push("report.json".into());
        }
        outputs.extend(outcome.tables.iter().map(|t| format!("{}.csv", t.name)));
        if outcome.timings.is_some() {
            outputs.push("timings.json".into());
        }
        outcome.manifest.outputs = outputs;
    }
    let report = serde_json::to_string_pretty(&Envelope {
        manifest: &outcome.manifest,
        result: &outcome.result,
    })? + "\n";
    let stdout = match format {
        Format::Json => report.clone(),
        Format::Csv => match outcome.tables.first() {
            Some(t) => t.to_csv()?,
            None => {
                return Err(HarnessError::config(format!(
                    "{} has no tabular output; use --format json",
                    outcome.manifest.subcommand
                )))
            }
        },
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&outcome.manifest)? + "\n")?;
        if format == Format::Json {
            std::fs::write(dir.join("report.json"), &report)?;
        }
        for t in &outcome.tables {
            std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv()?)?;
        }
        if let Some(timings) = &outcome.timings {
            std::fs::write(dir.join("timings.json"), serde_json::to_string_pretty(timings)? + "\n")?;
        }
    }
    Ok((stdout, outcome.failed))
}

pub fn num(v: f64) -> String {
    format!("{v}")
}
