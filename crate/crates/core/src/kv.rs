//! Line-oriented `key = value` files with `#` comments.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    origin: String,
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(origin: &str, text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(parse_error(
                    origin,
                    n + 1,
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(parse_error(origin, n + 1, "empty key".into()));
            }
            if entries
                .insert(key.to_string(), (n + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(parse_error(origin, n + 1, format!("duplicate key `{key}`")));
            }
        }
        Ok(Self {
            origin: origin.to_string(),
            entries,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Parse {
            origin: self.origin.clone(),
            line: 0,
            message: format!("missing key `{key}`"),
        })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Error positioned at the line that defined `key`.
    pub fn error_at(&self, key: &str, message: String) -> Error {
        let line = self.entries.get(key).map(|(n, _)| *n).unwrap_or(0);
        parse_error(&self.origin, line, message)
    }

    pub fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| self.error_at(key, format!("bad value for `{key}`: {e}"))),
        }
    }

    /// Comma- or whitespace-separated list of reals.
    pub fn reals(&self, key: &str) -> Result<Vec<f64>> {
        self.require(key)?
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| self.error_at(key, format!("bad number `{t}` in `{key}`: {e}")))
            })
            .collect()
    }
}

fn parse_error(origin: &str, line: usize, message: String) -> Error {
    Error::Parse {
        origin: origin.to_string(),
        line,
        message,
    }
}
