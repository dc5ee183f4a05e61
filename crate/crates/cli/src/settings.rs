//! Option resolution: command-line flag, then config file, then default.
//!
//! The config file holds one `key = value` pair per line, keys named like
//! the long flags without the dashes (`omega = -143.9`, `grid-bins = 60`).
//! `#` starts a comment. A `manifest.json` from an earlier run is also
//! accepted; its `config` object is read as the file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl Settings {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let file = Self::parse(&text).map_err(|m| CliError::Usage(format!("{}: {m}", path.display())))?;
        Ok(Self {
            file,
            ..Self::default()
        })
    }

    pub fn parse(text: &str) -> Result<BTreeMap<String, String>, String> {
        if text.trim_start().starts_with('{') {
            let json: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
            let config = json
                .get("config")
                .and_then(|c| c.as_object())
                .ok_or("manifest has no config object")?;
            return config
                .iter()
                .map(|(k, v)| match v.as_str() {
                    Some(s) => Ok((normalize_key(k), s.to_string())),
                    None => Err(format!("config value for {k:?} is not a string")),
                })
                .collect();
        }
        let mut out = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
            let key = normalize_key(key);
            if key.is_empty() {
                return Err(format!("line {}: empty key", i + 1));
            }
            out.insert(key, value.trim().to_string());
        }
        Ok(out)
    }

    fn lookup<T>(&mut self, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(raw) = self.file.get(key) else {
            return Ok(None);
        };
        self.used.insert(key.to_string());
        raw.parse()
            .map(Some)
            .map_err(|e| CliError::Usage(format!("config key {key} = {raw:?}: {e}")))
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let from_file = self.lookup(key)?;
        let value = flag.or(from_file);
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.optional(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn required<T>(&mut self, key: &str, flag: Option<T>) -> CliResult<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.optional(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing --{key} (flag or config file)")))
    }

    /// Boolean switch: set by the flag or by `key = true` in the file.
    pub fn switch(&mut self, key: &str, flag: bool) -> CliResult<bool> {
        let v = flag || self.lookup::<bool>(key)?.unwrap_or(false);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }

    pub fn unused_keys(&self) -> Vec<&str> {
        self.file
            .keys()
            .filter(|k| !self.used.contains(*k))
            .map(String::as_str)
            .collect()
    }
}

/// Comma-separated list of numbers.
pub fn parse_list<T>(key: &str, text: &str) -> CliResult<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| CliError::Usage(format!("--{key}: {s:?}: {e}")))
        })
        .collect()
}
