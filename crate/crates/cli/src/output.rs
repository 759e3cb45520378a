//! Result tables, summaries and atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// A rectangular result table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
    }
}

/// Formats a float so that reading it back gives the same value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// One pass/fail assertion of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// |measured − target| ≤ tolerance.
    pub fn within(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let passed = (measured - target).abs() <= tolerance;
        Self { name: name.into(), measured, target, tolerance, passed }
    }

    /// measured ≤ target + tolerance.
    pub fn at_most(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let passed = measured <= target + tolerance;
        Self { name: name.into(), measured, target, tolerance, passed }
    }

    /// measured ≥ target − tolerance.
    pub fn at_least(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let passed = measured >= target - tolerance;
        Self { name: name.into(), measured, target, tolerance, passed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub label: String,
    pub slope: f64,
    pub intercept: f64,
    pub slope_halfwidth: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub output_path: String,
    pub rows: usize,
    pub wall_time_seconds: f64,
    pub passed: bool,
    pub fits: Vec<FitSummary>,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// `out.csv` → `out.summary.toml`.
pub fn summary_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.summary.toml"))
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
