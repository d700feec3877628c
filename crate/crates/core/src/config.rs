//! Line-oriented `key=value` experiment configuration with a stable content hash.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Resolved parameters of one run. Keys are kept sorted so the canonical text, and
/// therefore the hash, does not depend on the order settings were supplied in.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key=value, got {line:?}", n + 1)));
            };
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(Error::Config(format!("line {}: bad key {k:?}", n + 1)));
            }
            cfg.set(k, v.trim());
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    /// Sets `key` only if absent, for filling defaults after flags and file.
    pub fn set_default(&mut self, key: &str, value: impl ToString) {
        self.values
            .entry(key.to_string())
            .or_insert_with(|| value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required key {key}")))
    }

    fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
        v.trim()
            .parse()
            .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        Self::parse_value(key, self.required(key)?)
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        Self::parse_value(key, self.required(key)?)
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        Self::parse_value(key, self.required(key)?)
    }

    /// Comma-separated list; an empty value is an empty list.
    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.required(key)?;
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| Self::parse_value(key, s))
            .collect()
    }

    pub fn get_u32_list(&self, key: &str) -> Result<Vec<u32>> {
        let v = self.required(key)?;
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| Self::parse_value(key, s))
            .collect()
    }

    /// One `key=value` per line, sorted by key.
    pub fn canonical(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Comment line opening every CSV: hash plus the full resolved config.
    pub fn csv_comment(&self) -> String {
        let pairs: Vec<String> = self.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("# config_hash={} {}", self.hash(), pairs.join(";"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_lookup() {
        let cfg = ExperimentConfig::parse("# comment\nalpha = 0.15\n\nsnr=10,20 ,30\ntrials=5\n")
            .unwrap();
        assert_eq!(cfg.get_f64("alpha").unwrap(), 0.15);
        assert_eq!(cfg.get_f64_list("snr").unwrap(), vec![10.0, 20.0, 30.0]);
        assert_eq!(cfg.get_usize("trials").unwrap(), 5);
        assert!(cfg.get_f64("missing").is_err());
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(matches!(ExperimentConfig::parse("alpha"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("a b=1"), Err(Error::Config(_))));
        let cfg = ExperimentConfig::parse("alpha=x").unwrap();
        assert!(matches!(cfg.get_f64("alpha"), Err(Error::Config(_))));
    }

    #[test]
    fn hash_ignores_order_and_tracks_values() {
        let a = ExperimentConfig::parse("a=1\nb=2").unwrap();
        let b = ExperimentConfig::parse("b=2\na=1").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = ExperimentConfig::parse("a=1\nb=3").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn known_digest() {
        // sha256("a=1\n")
        let cfg = ExperimentConfig::parse("a=1").unwrap();
        assert_eq!(cfg.canonical(), "a=1\n");
        assert_eq!(
            cfg.hash(),
            "fe3209d6d4f51935b391288a43df48d9ddece1a992597ae53387ca16611a9179"
        );
    }

    #[test]
    fn defaults_do_not_override() {
        let mut cfg = ExperimentConfig::parse("seed=9").unwrap();
        cfg.set_default("seed", 1);
        cfg.set_default("trials", 3);
        assert_eq!(cfg.get_u64("seed").unwrap(), 9);
        assert_eq!(cfg.get_u64("trials").unwrap(), 3);
        assert!(cfg.csv_comment().starts_with("# config_hash="));
    }
}
