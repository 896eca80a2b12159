//! Opt-in provenance log: one JSON object per run, appended to a
//! per-directory file. The whole line is written in a single call so
//! concurrent runs interleave at line granularity.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub const LOG_FILE: &str = "l12lab-runs.jsonl";

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: String,
    /// Content hash of the canonical instance document the run acted on.
    pub instance_digest: String,
    pub options: serde_json::Value,
    pub seed: u64,
    pub results: serde_json::Value,
    pub wall_ms: u64,
}

pub fn append(dir: &Path, record: &RunRecord) -> Result<PathBuf> {
    let path = dir.join(LOG_FILE);
    let mut line = serde_json::to_string(record).context("run record serialization")?;
    line.push('\n');
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .with_context(|| format!("opening {}", path.display()))?;
    file.write_all(line.as_bytes())
        .with_context(|| format!("appending to {}", path.display()))?;
    Ok(path)
}
