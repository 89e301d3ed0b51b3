use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

/// Shortest round-trip form, in exponent notation.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Times rounded to 12 significant digits, so `3·0.1` prints as `0.3`.
pub fn time(t: f64) -> String {
    let rounded: f64 = format!("{t:.11e}").parse().unwrap_or(t);
    format!("{rounded}")
}

/// Writes a CSV file with a header row, `.` decimals and LF line endings.
pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| io(path, e))?;
    w.write_record(header).map_err(|e| io(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

#[derive(Clone, Debug, Serialize)]
pub struct Constants {
    /// Declared (or sampled) sup bound of the coupling fields.
    pub k_declared: f64,
    pub m_fitted: Option<f64>,
    pub gamma_fitted: Option<f64>,
    pub fit_method: Option<String>,
    pub mu: Option<f64>,
    /// `auto` (from the fitted constants) or `config`.
    pub mu_source: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckStatus {
    pub name: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_path: String,
    pub config_sha256: String,
    pub solver: Option<String>,
    pub seed: u64,
    pub constants: Constants,
    pub wall_time_s: f64,
    pub checks: Vec<CheckStatus>,
    pub artifacts: Vec<String>,
}

pub fn config_hash(raw: &[u8]) -> String {
    hex::encode(Sha256::digest(raw))
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf, CliError> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest).map_err(|e| io(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        assert_eq!(time(3.0 * 0.1), "0.3");
        assert_eq!(time(2.001), "2.001");
        assert_eq!(num(0.00125), "1.25e-3");
        assert_eq!(num(0.0), "0e0");
        assert_eq!(config_hash(b"").len(), 64);
    }
}
