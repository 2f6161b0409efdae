//! Config-file loading and flag/file/default resolution.
//!
//! A config file holds `key = value` lines (keys matching the long flag
//! names, `#` comments allowed).  Command-line flags override file entries;
//! built-in defaults fill whatever remains.

use std::collections::HashMap;
use std::path::Path;

use crate::sweep::{parse_number, parse_sweep, parse_usize_sweep};

#[derive(Debug, Default)]
pub struct FileConfig {
    map: HashMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> Self {
        FileConfig::default()
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
        let mut map = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                format!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    lineno + 1
                )
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { map })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }
}

pub fn resolve_f64(
    cli: Option<f64>,
    file: &FileConfig,
    key: &str,
    default: f64,
) -> Result<f64, String> {
    if let Some(v) = cli {
        return Ok(v);
    }
    match file.get(key) {
        Some(s) => parse_number(s).map_err(|e| format!("config key `{key}`: {e}")),
        None => Ok(default),
    }
}

pub fn resolve_usize(
    cli: Option<usize>,
    file: &FileConfig,
    key: &str,
    default: usize,
) -> Result<usize, String> {
    if let Some(v) = cli {
        return Ok(v);
    }
    match file.get(key) {
        Some(s) => s
            .trim()
            .parse()
            .map_err(|_| format!("config key `{key}`: not an integer: `{s}`")),
        None => Ok(default),
    }
}

pub fn resolve_string(cli: Option<String>, file: &FileConfig, key: &str, default: &str) -> String {
    cli.or_else(|| file.get(key).map(str::to_string))
        .unwrap_or_else(|| default.to_string())
}

/// Optional string with no default (`None` when absent everywhere).
pub fn resolve_opt_string(cli: Option<String>, file: &FileConfig, key: &str) -> Option<String> {
    cli.or_else(|| file.get(key).map(str::to_string))
}

pub fn resolve_sweep(
    cli: Option<String>,
    file: &FileConfig,
    key: &str,
    default: &str,
) -> Result<Vec<f64>, String> {
    let spec = resolve_string(cli, file, key, default);
    parse_sweep(&spec).map_err(|e| format!("flag/key `{key}`: {e}"))
}

pub fn resolve_usize_sweep(
    cli: Option<String>,
    file: &FileConfig,
    key: &str,
    default: &str,
) -> Result<Vec<usize>, String> {
    let spec = resolve_string(cli, file, key, default);
    parse_usize_sweep(&spec).map_err(|e| format!("flag/key `{key}`: {e}"))
}

/// A sweepable flag used where only one value makes sense.
pub fn single(values: Vec<f64>, what: &str) -> Result<f64, String> {
    if values.len() == 1 {
        Ok(values[0])
    } else {
        Err(format!("{what} takes exactly one value, got {values:?}"))
    }
}
