//! Resolving suite parameters from flags, an optional TOML file and
//! built-in defaults, in that order of precedence.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// A malformed config file, a bad flag value, or an empty grid.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

/// The resolved parameters of one run. Threads and output paths are not
/// part of it, so they never change the hash.
#[derive(Debug, Serialize)]
pub struct SuiteConfig {
    pub suite: String,
    pub params: BTreeMap<String, serde_json::Value>,
}

impl SuiteConfig {
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        chiamp::report::sha256_hex(text.as_bytes())
    }
}

/// Looks up `[<section>]` keys in the config file.
pub struct Resolver {
    table: toml::Table,
    config: SuiteConfig,
}

impl Resolver {
    pub fn new(file: Option<&toml::Table>, section: &str) -> Result<Self, ConfigError> {
        let mut table = toml::Table::new();
        if let Some(root) = file {
            let mut node = Some(root);
            for part in section.split('.') {
                node = match node.and_then(|t| t.get(part)) {
                    Some(toml::Value::Table(t)) => Some(t),
                    Some(_) => return Err(ConfigError(format!("[{section}] must be a table"))),
                    None => None,
                };
            }
            if let Some(t) = node {
                table = t.clone();
            }
        }
        Ok(Self {
            table,
            config: SuiteConfig {
                suite: section.to_string(),
                params: BTreeMap::new(),
            },
        })
    }

    /// Flag, else config key, else default; the resolved value is recorded.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, ConfigError>
    where
        T: Serialize + DeserializeOwned,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.table.get(key) {
                Some(v) => v
                    .clone()
                    .try_into()
                    .map_err(|e| ConfigError(format!("{}.{key}: {e}", self.config.suite)))?,
                None => default,
            },
        };
        let json = serde_json::to_value(&value).map_err(|e| ConfigError(e.to_string()))?;
        self.config.params.insert(key.to_string(), json);
        Ok(value)
    }

    /// As [`Self::get`] for a list, where an empty flag list means "unset".
    pub fn list<T>(&mut self, key: &str, flag: Vec<T>, default: Vec<T>) -> Result<Vec<T>, ConfigError>
    where
        T: Serialize + DeserializeOwned,
    {
        let flag = if flag.is_empty() { None } else { Some(flag) };
        let v = self.get(key, flag, default)?;
        if v.is_empty() {
            return Err(ConfigError(format!("{}: {key} is empty", self.config.suite)));
        }
        Ok(v)
    }

    pub fn finish(self) -> SuiteConfig {
        self.config
    }
}

pub fn load(path: &Path) -> Result<toml::Table, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}
