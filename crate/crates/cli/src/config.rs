//! TOML run configuration with dotted-path overrides.
//!
//! ```toml
//! [vehicle]
//! model = "csm"
//! [vehicle.params]
//! steering_efficiency = 0.6
//! [sim]
//! dt = 0.001
//! [sim.solver]
//! max_iterations = 50
//! [run]
//! models = ["csm"]
//! scenarios = ["straight"]
//! seeds = [0, 1, 2]
//! output = "out"
//! [search]
//! iterations = 5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use toml::{Table, Value};

use tracksim::scenario::{build_scenario, SimConfig};
use tracksim::search::{ParamSpace, SearchSettings};
use tracksim::vehicle::{ModelKind, VehicleConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("bad override '{0}': expected key.path=value")]
    BadOverride(String),
    #[error("override '{key}': '{segment}' is not a table")]
    NotATable { key: String, segment: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Models used by `bench`; `run` and `optimize` use `vehicle.model`.
    pub models: Vec<ModelKind>,
    /// Empty means all scenarios.
    pub scenarios: Vec<String>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            scenarios: Vec::new(),
            seeds: (0..10).collect(),
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub seed: u64,
    pub iterations: usize,
    pub samples: usize,
    pub trials: usize,
    /// Empty means the default space around `vehicle.params`.
    pub space: Option<ParamSpace>,
    /// Empty means all scenarios.
    pub scenarios: Vec<String>,
}

impl Default for SearchSection {
    fn default() -> Self {
        let d = SearchSettings::default();
        Self {
            seed: 0,
            iterations: d.iterations,
            samples: d.samples,
            trials: d.trials,
            space: None,
            scenarios: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub vehicle: VehicleConfig,
    pub sim: SimConfig,
    pub run: RunSection,
    pub search: SearchSection,
}

fn merge(into: &mut Table, from: Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

/// Sets `a.b.c = value` in a table, creating intermediate tables.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(spec.into()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::BadOverride(spec.into()));
    }
    let parts: Vec<&str> = key.split('.').collect();
    let mut t = table;
    for seg in &parts[..parts.len() - 1] {
        let entry = t.entry(seg.to_string()).or_insert_with(|| Value::Table(Table::new()));
        t = match entry {
            Value::Table(inner) => inner,
            _ => {
                return Err(ConfigError::NotATable {
                    key: key.into(),
                    segment: seg.to_string(),
                })
            }
        };
    }
    t.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl SearchSection {
    pub fn settings(&self) -> SearchSettings {
        SearchSettings {
            iterations: self.iterations,
            samples: self.samples,
            trials: self.trials,
        }
    }
}

impl Config {
    /// Reads and merges config files in order, then applies overrides.
    pub fn load(files: &[PathBuf], overrides: &[String]) -> Result<Self, ConfigError> {
        Self::load_with_defaults(&[], files, overrides)
    }

    /// Like [`Config::load`], with `defaults` applied before the files.
    pub fn load_with_defaults(
        defaults: &[String],
        files: &[PathBuf],
        overrides: &[String],
    ) -> Result<Self, ConfigError> {
        let mut table = Table::new();
        for d in defaults {
            apply_override(&mut table, d)?;
        }
        for f in files {
            let text = std::fs::read_to_string(f).map_err(|e| ConfigError::Io {
                path: f.clone(),
                source: e,
            })?;
            let t: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
                path: f.display().to_string(),
                message: e.to_string(),
            })?;
            merge(&mut table, t);
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn from_table(table: Table) -> Result<Self, ConfigError> {
        // reparsed from text so errors quote the offending key
        let text = toml::to_string(&table).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let cfg: Config = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: "config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |e: String| ConfigError::Invalid(e);
        self.vehicle.validate().map_err(|e| inv(e.to_string()))?;
        self.sim.steps_per_sample().map_err(|e| inv(e.to_string()))?;
        self.sim
            .solver
            .validate()
            .map_err(|e| inv(format!("sim.solver: {e}")))?;
        if !(self.sim.ground_mu >= 0.0) {
            return Err(inv("sim.ground_mu must be >= 0".into()));
        }
        if !(self.sim.jitter >= 0.0) {
            return Err(inv("sim.jitter must be >= 0".into()));
        }
        for s in self.run.scenarios.iter().chain(&self.search.scenarios) {
            build_scenario(s).map_err(|e| inv(e.to_string()))?;
        }
        self.search.settings().validate().map_err(|e| inv(e.to_string()))?;
        if let Some(space) = &self.search.space {
            space.validate().map_err(|e| inv(e.to_string()))?;
        }
        Ok(())
    }

    /// SHA-256 of the resolved config in canonical JSON, ignoring the output
    /// directory.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(run) = v.get_mut("run").and_then(|r| r.as_object_mut()) {
            run.remove("output");
        }
        let json = v.to_string();
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn output_dir(&self) -> &Path {
        &self.run.output
    }
}
