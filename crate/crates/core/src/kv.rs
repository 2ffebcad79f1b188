//! Flat `key=value` text used for manifests, configs, reports and checkpoint
//! metadata.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KvError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("missing key {0}")]
    Missing(String),
    #[error("key {key}: cannot parse {value:?}")]
    BadValue { key: String, value: String },
}

/// Ordered key/value pairs; keys are unique and iterate sorted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvMap(pub BTreeMap<String, String>);

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key).ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<T, KvError> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| KvError::BadValue { key: key.to_string(), value: raw.to_string() })
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    /// Whitespace around keys and values is trimmed.
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| KvError::Malformed { line: i + 1, text: raw.to_string() })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(KvError::Malformed { line: i + 1, text: raw.to_string() });
            }
            map.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// SHA-256 of the rendered text, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }

    /// First 16 hex digits of [`KvMap::digest`].
    pub fn short_digest(&self) -> String {
        self.digest()[..16].to_string()
    }
}
