//! `key=value` text configuration.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored.
//! Keys are case-sensitive and may appear only once.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("config line {}: expected key=value", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Format(format!("config line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Format(format!(
                    "config line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format(format!("{}: config is not UTF-8", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    /// Typed lookup; `Ok(None)` when the key is absent.
    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Format(format!("config key '{key}': cannot parse '{v}'"))),
        }
    }

    /// Parses a list value: `a,b,c` or an inclusive range `start:end:step`.
    pub fn get_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.get(key).map(|v| parse_list(key, v)).transpose()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let bad = || Error::Format(format!("config key '{key}': bad list '{value}'"));
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').map(str::trim).collect();
        let (start, end, step) = match parts.as_slice() {
            [s, e] => (s.parse().map_err(|_| bad())?, e.parse().map_err(|_| bad())?, 1usize),
            [s, e, st] => (
                s.parse().map_err(|_| bad())?,
                e.parse().map_err(|_| bad())?,
                st.parse().map_err(|_| bad())?,
            ),
            _ => return Err(bad()),
        };
        if step == 0 || start > end {
            return Err(bad());
        }
        return Ok((start..=end).step_by(step).collect());
    }
    value
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| bad()))
        .collect()
}
