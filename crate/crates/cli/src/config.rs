//! Parameter resolution: command-line flags, then the JSON config file, then
//! built-in defaults.
//!
//! The config file is a JSON object. Top-level keys apply to every
//! subcommand; an object under the subcommand's name (`"couple"`,
//! `"mix-scaling"`, ...) overrides them. Keys are the long flag names with
//! dashes replaced by underscores.

use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::UsageError;

pub struct Resolver {
    file: Map<String, Value>,
    resolved: Map<String, Value>,
}

impl Resolver {
    pub fn new(config: Option<&Path>, command: &str) -> anyhow::Result<Self> {
        let mut file = Map::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
            let Value::Object(top) = value else {
                return Err(UsageError(format!("config {} is not a JSON object", path.display())).into());
            };
            for (k, v) in &top {
                if !v.is_object() {
                    file.insert(k.clone(), v.clone());
                }
            }
            if let Some(Value::Object(section)) = top.get(command) {
                file.extend(section.clone());
            }
        }
        Ok(Self {
            file,
            resolved: Map::new(),
        })
    }

    fn from_file<T: DeserializeOwned>(&self, key: &str) -> anyhow::Result<Option<T>> {
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| UsageError(format!("config key {key:?}: {e}")).into()),
        }
    }

    fn record<T: Serialize>(&mut self, key: &str, value: &T) {
        self.resolved
            .insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    /// Flag, else config, else `default`.
    pub fn get<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>, default: T) -> anyhow::Result<T> {
        let v = match flag {
            Some(v) => v,
            None => self.from_file(key)?.unwrap_or(default),
        };
        self.record(key, &v);
        Ok(v)
    }

    /// Flag, else config, else a usage error.
    pub fn require<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>) -> anyhow::Result<T> {
        let v = match flag {
            Some(v) => v,
            None => self
                .from_file(key)?
                .ok_or_else(|| UsageError(format!("missing required --{}", key.replace('_', "-"))))?,
        };
        self.record(key, &v);
        Ok(v)
    }

    /// Flag, else config, else `None`.
    pub fn optional<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>) -> anyhow::Result<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.from_file(key)?,
        };
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }

    /// Records a derived value (e.g. `beta` computed from `beta_frac`).
    pub fn note<T: Serialize>(&mut self, key: &str, value: &T) {
        self.record(key, value);
    }

    pub fn into_params(self) -> Value {
        Value::Object(self.resolved)
    }
}
