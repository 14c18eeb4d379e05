//! Flat `key = value` text documents. Blank lines and lines starting with
//! `#` are ignored.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvDocument {
    entries: BTreeMap<String, String>,
}

impl KvDocument {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::invalid(format!("missing key '{key}'")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

pub fn parse(text: &str) -> Result<KvDocument> {
    let mut entries = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::invalid(format!("line {}: expected 'key = value'", n + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::invalid(format!("line {}: empty key", n + 1)));
        }
        if entries.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::invalid(format!("line {}: duplicate key '{key}'", n + 1)));
        }
    }
    Ok(KvDocument { entries })
}
