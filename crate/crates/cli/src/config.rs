//! Settings resolution: command-line flags over config-file values over
//! built-in defaults, recorded in a [`RunManifest`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Flat key/value settings read from a JSON object.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, Value>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(msg) => CliError::Usage(format!("config file {}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("malformed JSON: {e}")))?;
        let Value::Object(map) = value else {
            return Err(CliError::Usage("expected a flat JSON object of settings".into()));
        };
        let mut values = BTreeMap::new();
        for (k, v) in map {
            if v.is_object() || v.is_array() {
                return Err(CliError::Usage(format!("key `{k}`: nested values are not supported")));
            }
            values.insert(k.replace('-', "_"), v);
        }
        Ok(Self { values })
    }
}

/// Resolves each setting once and records the result.
pub struct Resolver<'a> {
    file: &'a ConfigFile,
    resolved: BTreeMap<String, Value>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a ConfigFile) -> Self {
        Self { file, resolved: BTreeMap::new() }
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: Serialize + DeserializeOwned,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.values.get(key) {
                Some(raw) => serde_json::from_value(raw.clone())
                    .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}")))?,
                None => default,
            },
        };
        let json = serde_json::to_value(&value).map_err(|e| CliError::Usage(format!("{key}: {e}")))?;
        self.resolved.insert(key.to_string(), json);
        Ok(value)
    }

    /// Boolean switch: a set flag wins, otherwise the file, otherwise false.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        self.get(key, flag.then_some(true), false)
    }

    /// Fails on any file key that this subcommand never asked for.
    pub fn finish(self) -> Result<BTreeMap<String, Value>, CliError> {
        let used: BTreeSet<&String> = self.resolved.keys().collect();
        if let Some(unknown) = self.file.values.keys().find(|k| !used.contains(k)) {
            return Err(CliError::Usage(format!("config key `{unknown}` is not a setting of this subcommand")));
        }
        Ok(self.resolved)
    }
}

/// Everything that determines the bytes a run writes.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: BTreeMap<String, Value>,
    pub master_seed: Option<u64>,
    pub version: String,
    pub out_dir: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: BTreeMap<String, Value>, out_dir: &Path) -> Self {
        let master_seed = config.get("seed").and_then(Value::as_u64);
        Self {
            subcommand: subcommand.to_string(),
            config,
            master_seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            out_dir: out_dir.display().to_string(),
            outputs: Vec::new(),
        }
    }

    /// SHA-256 of the canonical JSON form (keys sorted).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("manifest serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_epsilons(list: &str) -> Result<Vec<f64>, CliError> {
    let bad = |what: &str| CliError::Usage(format!("epsilons `{list}`: {what}"));
    let values: Vec<f64> = if list.contains(':') {
        let parts: Vec<f64> = list
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad("expected start:stop:step")))
            .collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step"));
        };
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Round to the step's precision so 0.1:0.9:0.1 yields 0.3, not 0.30000000000000004.
        (0..count).map(|i| ((start + step * i as f64) * 1e9).round() / 1e9).collect()
    } else {
        list.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad("expected a number list")))
            .collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err(bad("no values"));
    }
    if let Some(e) = values.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(CliError::Usage(format!("epsilon must lie in [0, 1], got {e}")));
    }
    Ok(values)
}
