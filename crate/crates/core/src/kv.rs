//! Plain-text `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may appear at
//! most once.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct KvDocument {
    entries: Vec<(String, String, usize)>,
    origin: String,
}

impl KvDocument {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, i + 1, "expected key = value"))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::parse(origin, i + 1, "empty key"));
            }
            if entries.iter().any(|(k, _, _)| *k == key) {
                return Err(Error::parse(origin, i + 1, format!("duplicate key '{key}'")));
            }
            entries.push((key, value.trim().to_string(), i + 1));
        }
        Ok(Self {
            entries,
            origin: origin.to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _, _)| k.as_str())
    }

    /// Fails on the first key not in `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        for (k, _, line) in &self.entries {
            if !known.contains(&k.as_str()) {
                return Err(Error::parse(&self.origin, *line, format!("unknown key '{k}'")));
            }
        }
        Ok(())
    }

    /// Parses `key` with `FromStr`, or returns `None` when absent.
    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some((_, value, line)) = self.entries.iter().find(|(k, _, _)| k == key) else {
            return Ok(None);
        };
        value.parse().map(Some).map_err(|_| {
            Error::parse(&self.origin, *line, format!("invalid value '{value}' for '{key}'"))
        })
    }

    /// Comma-separated list; an empty value is an empty list.
    pub fn get_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some((_, value, line)) = self.entries.iter().find(|(k, _, _)| k == key) else {
            return Ok(None);
        };
        if value.is_empty() {
            return Ok(Some(Vec::new()));
        }
        value
            .split(',')
            .map(|item| {
                item.trim().parse().map_err(|_| {
                    Error::parse(&self.origin, *line, format!("invalid list item '{item}' for '{key}'"))
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

pub fn join_list<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
