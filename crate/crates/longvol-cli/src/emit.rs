//! Result emission: CSV tables at full round-trip precision, JSON
//! summaries, and the run manifest that pairs every output with enough
//! context to reproduce it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, ErrorKind};

/// One decimal digit more than f64 round-trip needs; diffs are exact.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        Csv { text: format!("{header}\n") }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn into_text(self) -> String {
        self.text
    }
}

/// Everything a subcommand produced, before any of it touches disk. A set
/// failure still gets its files written, then drives the exit code.
pub struct RunOutput {
    pub summary_name: String,
    pub summary: Value,
    pub csv_files: Vec<(String, String)>,
    pub failure: Option<CliError>,
}

impl RunOutput {
    pub fn new(summary_name: &str, summary: Value) -> Self {
        RunOutput {
            summary_name: summary_name.to_string(),
            summary,
            csv_files: Vec::new(),
            failure: None,
        }
    }

    pub fn with_csv(mut self, name: &str, text: String) -> Self {
        self.csv_files.push((name.to_string(), text));
        self
    }

    pub fn with_failure(mut self, failure: CliError) -> Self {
        self.failure = Some(failure);
        self
    }
}

#[derive(Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub parameters: Value,
    pub config: Value,
    pub outputs: Vec<String>,
    /// Wall-clock only; excluded from the reproducibility contract.
    pub timings_ms: Value,
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| {
        CliError::new(ErrorKind::Config, "cli", "write_output", format!("{}: {e}", path.display()))
    })?;
    Ok(path)
}

/// Write the output files plus manifest into `dir`, returning the emitted
/// names in manifest order.
pub fn write_all(
    dir: &Path,
    output: &RunOutput,
    mut manifest: RunManifest,
) -> Result<Vec<String>, CliError> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::new(ErrorKind::Config, "cli", "write_output", format!("{}: {e}", dir.display()))
    })?;
    let mut names = Vec::new();
    for (name, text) in &output.csv_files {
        write_file(dir, name, text)?;
        names.push(name.clone());
    }
    let summary_text = to_pretty(&output.summary);
    write_file(dir, &output.summary_name, &summary_text)?;
    names.push(output.summary_name.clone());
    manifest.outputs = names.clone();
    let manifest_text = to_pretty(&serde_json::to_value(&manifest).expect("manifest"));
    write_file(dir, "run_manifest.json", &manifest_text)?;
    Ok(names)
}

pub fn to_pretty(v: &Value) -> String {
    let mut text = serde_json::to_string_pretty(v).expect("json serialization");
    text.push('\n');
    text
}
