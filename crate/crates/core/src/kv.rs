//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, values may be wrapped in double
//! quotes. Keys are unique.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot parse {value:?}")]
    BadValue { key: String, value: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvFile {
    entries: BTreeMap<String, String>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(KvError::Syntax { line })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(KvError::Syntax { line });
            }
            let value = unquote(value.trim());
            if entries.insert(key.to_owned(), value.to_owned()).is_some() {
                return Err(KvError::DuplicateKey {
                    line,
                    key: key.to_owned(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self, KvError> {
        let text = std::fs::read_to_string(path).map_err(|source| KvError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key).ok_or_else(|| KvError::Missing(key.to_owned()))
    }

    /// Parses an optional value, falling back to `default` when absent.
    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, KvError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| KvError::BadValue {
                key: key.to_owned(),
                value: v.to_owned(),
            }),
        }
    }

    /// Fails on any key outside `known`.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<(), KvError> {
        match self.entries.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(KvError::UnknownKey(k.clone())),
            None => Ok(()),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(value: &str) -> &str {
    value
        .strip_prefix('"')
        .and_then(|v| v.strip_suffix('"'))
        .unwrap_or(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let kv = KvFile::parse(
            "# etl\nmovements = data/movements.csv\nreject_zero_amount=true # inline\nname = \"a # b\"\n\n",
        )
        .unwrap();
        assert_eq!(kv.get("movements"), Some("data/movements.csv"));
        assert!(kv.parse_or("reject_zero_amount", false).unwrap());
        assert_eq!(kv.get("name"), Some("a # b"));
        assert_eq!(kv.parse_or("revaluation_window_days", 5u32).unwrap(), 5);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(KvFile::parse("novalue"), Err(KvError::Syntax { line: 1 })));
        assert!(matches!(
            KvFile::parse("a=1\na=2"),
            Err(KvError::DuplicateKey { line: 2, .. })
        ));
        let kv = KvFile::parse("n = x").unwrap();
        assert!(kv.parse_or("n", 1u32).is_err());
        assert!(kv.reject_unknown(&["m"]).is_err());
    }
}
