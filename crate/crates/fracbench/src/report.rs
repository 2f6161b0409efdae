//! Deterministic CSV emission and the separate timing sidecar.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a CSV with fixed header and pre-rendered rows.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<(), String> {
    let mut text = String::with_capacity(rows.len() * 64 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Wall-clock accounting kept away from the result CSVs so those stay
/// byte-identical across runs.
pub struct Timings {
    path: PathBuf,
    lines: Vec<String>,
}

impl Timings {
    pub fn new(out_dir: &Path, experiment: &str) -> Self {
        Timings {
            path: out_dir.join(format!("{experiment}_timing.txt")),
            lines: Vec::new(),
        }
    }

    pub fn note(&mut self, label: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{label} = {value}"));
    }

    pub fn record(&mut self, label: &str, started: Instant) {
        self.lines
            .push(format!("{label} = {:.3} s", started.elapsed().as_secs_f64()));
    }

    pub fn write(&self) -> Result<(), String> {
        fs::write(&self.path, self.lines.join("\n") + "\n")
            .map_err(|e| format!("cannot write {}: {e}", self.path.display()))
    }
}

/// Ensure the output directory exists and is writable.
pub fn prepare_out_dir(dir: &Path) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"ok").map_err(|e| format!("{} not writable: {e}", dir.display()))?;
    let _ = fs::remove_file(&probe);
    Ok(())
}
