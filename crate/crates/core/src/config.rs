//! Flat `key=value` configuration with dotted keys.
//!
//! ```text
//! # comment
//! model.num_layers=2
//! model.layers.0.kind=gru
//! train.lr=0.005
//! ```
//!
//! Keys are unique; later sources (files, then command-line overrides) are
//! merged on top of earlier ones. Rendering sorts keys, so equal configs
//! render to identical text.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

fn check_key(key: &str) -> Result<()> {
    if key.is_empty()
        || key
            .chars()
            .any(|c| c.is_whitespace() || c == '=' || c == '#')
    {
        return Err(Error::InvalidConfig(format!("invalid key `{key}`")));
    }
    Ok(())
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key=value, got `{line}`", n + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            check_key(k).map_err(|e| Error::InvalidConfig(format!("line {}: {e}", n + 1)))?;
            if out.entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::InvalidConfig(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push('=');
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        debug_assert!(check_key(key).is_ok(), "bad key {key}");
        debug_assert!(!value.contains('\n'), "multi-line value for {key}");
        self.entries.insert(key.to_string(), value);
    }

    /// Checked variant of [`set`](Self::set) for user-supplied keys.
    pub fn try_set(&mut self, key: &str, value: &str) -> Result<()> {
        check_key(key)?;
        if value.contains('\n') {
            return Err(Error::InvalidConfig(format!("value for `{key}` spans lines")));
        }
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Overwrites entries with those of `other`.
    pub fn merge(&mut self, other: &KvConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    /// Entries under `prefix.`, with the prefix stripped.
    pub fn section(&self, prefix: &str) -> KvConfig {
        let p = format!("{prefix}.");
        KvConfig {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(&p).map(|s| (s.to_string(), v.clone())))
                .collect(),
        }
    }

    /// Inserts every entry of `other` under `prefix.`.
    pub fn insert_section(&mut self, prefix: &str, other: &KvConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(format!("{prefix}.{k}"), v.clone());
        }
    }

    pub fn get_parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::InvalidConfig(format!("`{key}={v}`: {e}"))),
        }
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get_parsed(key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get_parsed(key)?
            .ok_or_else(|| Error::InvalidConfig(format!("missing key `{key}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render_round_trip() {
        let text = "# run\nb.x = 2\n\na=hello world\n";
        let kv = KvConfig::parse(text).unwrap();
        assert_eq!(kv.get("a"), Some("hello world"));
        assert_eq!(kv.render(), "a=hello world\nb.x=2\n");
        assert_eq!(KvConfig::parse(&kv.render()).unwrap(), kv);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(KvConfig::parse("novalue").is_err());
        assert!(KvConfig::parse("a=1\na=2").is_err());
        assert!(KvConfig::parse("bad key=1").is_err());
        assert!(KvConfig::parse("=1").is_err());
    }

    #[test]
    fn typed_access() {
        let kv = KvConfig::parse("n=3\nlr=0.005\nflag=true\nbad=x").unwrap();
        assert_eq!(kv.require::<usize>("n").unwrap(), 3);
        assert_eq!(kv.get_or("lr", 1.0).unwrap(), 0.005);
        assert!(kv.require::<bool>("flag").unwrap());
        assert_eq!(kv.get_or("missing", 7u32).unwrap(), 7);
        assert!(kv.require::<usize>("bad").is_err());
        assert!(kv.require::<usize>("missing").is_err());
    }

    #[test]
    fn sections_and_merge() {
        let mut kv = KvConfig::parse("model.n=1\nmodel.k=2\ntrain.lr=0.1").unwrap();
        let model = kv.section("model");
        assert_eq!(model.render(), "k=2\nn=1\n");
        let over = KvConfig::parse("train.lr=0.5\ntrain.epochs=3").unwrap();
        kv.merge(&over);
        assert_eq!(kv.get("train.lr"), Some("0.5"));
        assert_eq!(kv.len(), 4);
        let mut fresh = KvConfig::new();
        fresh.insert_section("model", &model);
        assert_eq!(fresh.section("model"), model);
    }

    #[test]
    fn floats_render_exactly() {
        let mut kv = KvConfig::new();
        let v: f64 = 0.1 + 0.2;
        kv.set("v", v);
        assert_eq!(kv.require::<f64>("v").unwrap().to_bits(), v.to_bits());
    }
}
