//! Shared reporting plumbing: pass/fail gate records that every driver
//! returns alongside its numbers, and CSV writing with pinned headers.
//! Floats are written in Rust's shortest round-trip form, so a rerun that
//! produces bit-identical numbers produces byte-identical files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// One named pass/fail check with a human-readable measurement summary.
#[derive(Debug, Clone)]
pub struct GateOutcome {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

impl GateOutcome {
    pub fn new(label: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for GateOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] {}: {}", self.label, self.detail)
    }
}

/// True iff every gate in the slice passed (vacuously true when empty).
pub fn all_passed(gates: &[GateOutcome]) -> bool {
    gates.iter().all(|g| g.passed)
}

/// Print one line per gate to stdout.
pub fn print_gates(gates: &[GateOutcome]) {
    for g in gates {
        println!("{g}");
    }
}

/// Write `rows` to `<dir>/<name>` with the given header, creating `dir` if
/// needed. Returns the file path.
pub fn write_csv<R, F>(dir: &Path, name: &str, header: &[&str], rows: R) -> Result<PathBuf>
where
    R: IntoIterator<Item = F>,
    F: IntoIterator<Item = String>,
{
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut writer =
        csv::Writer::from_path(&path).with_context(|| format!("opening {}", path.display()))?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(path)
}

/// Shortest round-trip decimal form of a float, the one float format used
/// in CSV output.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
