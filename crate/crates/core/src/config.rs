//! Flat `key = value` configuration files.
//!
//! ```text
//! # comment lines and blank lines are ignored
//! n_tokens = 100
//! acceptance = 0, 0.5, 1          # comma-separated list
//! drafter_latency = 0.05:1:0.05   # start:end:step, end inclusive
//! pair.vicuna7b_alpaca.target_tpot = 26.0
//! ```
//!
//! Keys are made of lowercase letters, digits, `_` and `.`. Dotted keys of
//! the form `prefix.name.field` group related entries; see
//! [`KvConfig::groups`]. A key may appear only once.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
pub struct KvConfig {
    source: String,
    entries: BTreeMap<String, Entry>,
}

impl KvConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                source_name: source.to_string(),
                line,
                message,
            };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {content:?}")))?;
            let key = key.trim();
            let valid = !key.is_empty()
                && key
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.');
            if !valid {
                return Err(err(format!("invalid key {key:?}")));
            }
            let entry = Entry {
                value: value.trim().to_string(),
                line,
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(err(format!("duplicate key {key:?} (first set on line {})", prev.line)));
            }
        }
        Ok(KvConfig {
            source: source.to_string(),
            entries,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn parse_err(&self, key: &str, message: String) -> Error {
        Error::Parse {
            source_name: self.source.clone(),
            line: self.entries.get(key).map_or(0, |e| e.line),
            message: format!("{key}: {message}"),
        }
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn require_str(&self, key: &str) -> Result<&str> {
        self.get_str(key)
            .ok_or_else(|| Error::InvalidConfig(format!("{}: missing key {key:?}", self.source)))
    }

    /// Parse `key` as `T`, or `None` if absent.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get_str(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| self.parse_err(key, format!("cannot parse {v:?}: {e}"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| Error::InvalidConfig(format!("{}: missing key {key:?}", self.source)))
    }

    /// A comma-separated list, or a `start:end:step` range.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.get_str(key) else {
            return Ok(None);
        };
        parse_f64_list(v).map(Some).map_err(|m| self.parse_err(key, m))
    }

    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        let Some(v) = self.get_str(key) else {
            return Ok(None);
        };
        parse_usize_list(v).map(Some).map_err(|m| self.parse_err(key, m))
    }

    /// Names `x` such that some key `prefix.x.field` exists, sorted.
    pub fn groups(&self, prefix: &str) -> Vec<String> {
        let lead = format!("{prefix}.");
        let names: BTreeSet<String> = self
            .entries
            .keys()
            .filter_map(|k| k.strip_prefix(&lead))
            .filter_map(|rest| rest.split_once('.').map(|(name, _)| name.to_string()))
            .collect();
        names.into_iter().collect()
    }

    /// Fail on any key that is neither in `allowed` nor starts with one of `prefixes`.
    pub fn reject_unknown(&self, allowed: &[&str], prefixes: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            let known = allowed.contains(&key.as_str()) || prefixes.iter().any(|p| key.starts_with(p));
            if !known {
                return Err(self.parse_err(key, "unknown key".into()));
            }
        }
        Ok(())
    }
}

fn parse_f64_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("cannot parse {s:?}: {e}"));
    match parts.as_slice() {
        [start, end, step] => {
            let (start, end, step) = (num(start)?, num(end)?, num(step)?);
            if !(step > 0.0 && end >= start && start.is_finite() && end.is_finite()) {
                return Err(format!("bad range {v:?}"));
            }
            let count = ((end - start) / step + 1e-9).floor() as usize;
            // Round away accumulated representation error: 0.1*3 becomes 0.3.
            Ok((0..=count)
                .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                .collect())
        }
        [_] => v.split(',').map(|s| num(s.trim())).collect(),
        _ => Err(format!("expected a list or start:end:step, got {v:?}")),
    }
}

fn parse_usize_list(v: &str) -> std::result::Result<Vec<usize>, String> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    let num = |s: &str| s.parse::<usize>().map_err(|e| format!("cannot parse {s:?}: {e}"));
    match parts.as_slice() {
        [start, end, step] => {
            let (start, end, step) = (num(start)?, num(end)?, num(step)?);
            if step == 0 || end < start {
                return Err(format!("bad range {v:?}"));
            }
            Ok((start..=end).step_by(step).collect())
        }
        [_] => v.split(',').map(|s| num(s.trim())).collect(),
        _ => Err(format!("expected a list or start:end:step, got {v:?}")),
    }
}
