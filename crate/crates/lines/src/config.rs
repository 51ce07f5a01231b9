//! `key = value` config files. Keys mirror the CLI flag names; values given
//! on the command line win over the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

/// Every key any subcommand understands; unknown keys are usage errors so
/// typos fail loudly.
const KNOWN_KEYS: &[&str] = &[
    // global
    "seed",
    "threads",
    "reproducible",
    // preprocess
    "ink",
    "tolerance",
    "max-angle",
    "coarse",
    "fine",
    "median-radius",
    // segment
    "tau",
    "min-height",
    // corpus / splits
    "fractions",
    // synth
    "pages",
    "lines",
    "classes",
    "skew",
    "noise",
    "jitter",
    "tokens",
    // train / eval / sweep
    "hidden",
    "lr",
    "momentum",
    "max-epochs",
    "patience",
    "clip",
    "batch",
    "split",
    "sizes",
    // pipeline stage wiring
    "pages-dir",
    "gt-dir",
    "workdir",
];

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::usage(format!(
                    "{}:{}: unknown key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Parse the config value for `key`, if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                CliError::usage(format!("config key {key:?}: cannot parse {v:?}"))
            }),
        }
    }

    /// CLI value, else config value, else default.
    pub fn resolve<T: FromStr + Clone>(
        &self,
        cli: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T> {
        if let Some(v) = cli {
            return Ok(v);
        }
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Like `resolve` but with no default: missing is an error.
    pub fn require<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<T> {
        if let Some(v) = cli {
            return Ok(v);
        }
        self.get(key)?
            .ok_or_else(|| CliError::usage(format!("missing required {key:?}")))
    }
}

/// `a,b,c` split fractions.
pub fn parse_fractions(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::usage(format!(
            "fractions {s:?}: expected three comma-separated values"
        )));
    }
    let mut vals = [0.0f64; 3];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("fractions {s:?}: bad number {p:?}")))?;
    }
    Ok((vals[0], vals[1], vals[2]))
}

/// `lo..hi` inclusive range (also accepts a single value).
pub fn parse_range_f64(s: &str) -> Result<(f64, f64)> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo = lo
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("range {s:?}: bad lower bound")))?;
        let hi = hi
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("range {s:?}: bad upper bound")))?;
        Ok((lo, hi))
    } else {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("range {s:?}: bad value")))?;
        Ok((v, v))
    }
}

pub fn parse_range_usize(s: &str) -> Result<(usize, usize)> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo = lo
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("range {s:?}: bad lower bound")))?;
        let hi = hi
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("range {s:?}: bad upper bound")))?;
        Ok((lo, hi))
    } else {
        let v: usize = s
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("range {s:?}: bad value")))?;
        Ok((v, v))
    }
}

/// Comma-separated strictly-positive sizes.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("sizes {s:?}: bad entry {p:?}")))
        })
        .collect()
}
