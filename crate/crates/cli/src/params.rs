//! Layered run parameters: built-in defaults, then preset, then the
//! key=value config file, then command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use clap::parser::ValueSource;
use clap::ArgMatches;

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_")
}

impl Params {
    /// Reads `key = value` lines; blank lines and `#` comments are skipped.
    pub fn from_file(path: &Path, allowed: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config file {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("{}:{}: expected key=value, got `{line}`", path.display(), lineno + 1))
            })?;
            let k = normalize(k);
            if !allowed.contains(&k) || k == "config" {
                return Err(CliError::config(format!("{}:{}: unknown parameter `{k}`", path.display(), lineno + 1)));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Arguments given explicitly on the command line.
    pub fn from_matches(m: &ArgMatches) -> Self {
        let mut values = BTreeMap::new();
        for id in m.ids() {
            let id = id.as_str();
            if m.value_source(id) != Some(ValueSource::CommandLine) {
                continue;
            }
            let v = match m.get_raw(id) {
                Some(raw) if raw.len() > 0 => raw.map(|s| s.to_string_lossy().into_owned()).collect::<Vec<_>>().join(","),
                _ => "true".to_string(),
            };
            values.insert(id.to_string(), v);
        }
        Self { values }
    }

    /// Entries of `other` win.
    pub fn overlay(mut self, other: &Params) -> Self {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn set_default(&mut self, key: &str, value: impl ToString) {
        self.values.entry(key.to_string()).or_insert_with(|| value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let s = self.raw(key).ok_or_else(|| CliError::config(format!("missing parameter `{key}`")))?;
        s.parse::<f64>().map_err(|_| CliError::config(format!("parameter `{key}`: `{s}` is not a number")))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            None | Some("") | Some("auto") => Ok(None),
            Some(_) => self.f64(key).map(Some),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        let s = self.raw(key).ok_or_else(|| CliError::config(format!("missing parameter `{key}`")))?;
        s.parse::<usize>()
            .map_err(|_| CliError::config(format!("parameter `{key}`: `{s}` is not a non-negative integer")))
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            None | Some("false") | Some("0") | Some("no") => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some(s) => Err(CliError::config(format!("parameter `{key}`: `{s}` is not a boolean"))),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let s = self.raw(key).ok_or_else(|| CliError::config(format!("missing parameter `{key}`")))?;
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::config(format!("parameter `{key}`: `{t}` is not a number")))
            })
            .collect()
    }

    /// Every resolved entry as sorted `key=value` lines.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            if k != "config" {
                let _ = writeln!(s, "{k}={v}");
            }
        }
        s
    }
}
