//! Batch files: a list of scenarios, each a config file plus overrides.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_yaml::Value;

use super::HarnessError;
use crate::config::{validate_config_with, RawConfig, ScenarioConfig};
use crate::rng::{fnv1a, mix64};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    /// Config file, relative to the batch file.
    #[serde(default)]
    pub config: Option<PathBuf>,
    /// Deep-merged over the config file (or used alone without one).
    #[serde(default)]
    pub overrides: Option<Value>,
    pub num_runs: u32,
    /// Scenarios in the same group share their per-run seeds, so cells
    /// can be compared run by run.
    #[serde(default)]
    pub seed_group: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    #[serde(default)]
    pub base_seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[serde(default)]
    pub parallelism: Option<usize>,
    pub scenarios: Vec<ScenarioSpec>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A scenario with its config loaded and validated.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub name: String,
    pub config: ScenarioConfig,
    pub num_runs: u32,
    seed_key: String,
}

impl ResolvedScenario {
    pub fn seed(&self, base_seed: u64, run: u32) -> u64 {
        run_seed(base_seed, &self.seed_key, run)
    }
}

/// `base_seed` plus a stable hash of the seed key and run index.
pub fn run_seed(base_seed: u64, key: &str, run: u32) -> u64 {
    let mut bytes = key.as_bytes().to_vec();
    bytes.push(0);
    bytes.extend_from_slice(&run.to_le_bytes());
    base_seed.wrapping_add(mix64(fnv1a(&bytes)))
}

impl BatchSpec {
    pub fn from_yaml(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut spec: BatchSpec = serde_yaml::from_str(text).map_err(|e| HarnessError::Spec(e.to_string()))?;
        spec.base_dir = base_dir.to_path_buf();
        spec.check()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_yaml(&text, path.parent().unwrap_or(Path::new("")))
    }

    fn check(&self) -> Result<(), HarnessError> {
        if self.scenarios.is_empty() {
            return Err(HarnessError::Spec("no scenarios".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &self.scenarios {
            if !seen.insert(s.name.as_str()) {
                return Err(HarnessError::DuplicateScenario(s.name.clone()));
            }
            if s.num_runs == 0 {
                return Err(HarnessError::Spec(format!("scenario `{}`: num_runs must be at least 1", s.name)));
            }
            if s.name.is_empty() || s.name.contains(['/', '\\']) || s.name == "." || s.name == ".." {
                return Err(HarnessError::Spec(format!("scenario name `{}` is not a plain directory name", s.name)));
            }
            if s.config.is_none() && s.overrides.is_none() {
                return Err(HarnessError::Spec(format!("scenario `{}` has neither config nor overrides", s.name)));
            }
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output_dir)
    }

    /// Load and validate every scenario config.
    pub fn resolve(&self, known_policy: impl Fn(&str) -> bool) -> Result<Vec<ResolvedScenario>, HarnessError> {
        self.scenarios
            .iter()
            .map(|s| {
                let config = self.resolve_one(s, &known_policy)?;
                Ok(ResolvedScenario {
                    name: s.name.clone(),
                    config,
                    num_runs: s.num_runs,
                    seed_key: s.seed_group.clone().unwrap_or_else(|| s.name.clone()),
                })
            })
            .collect()
    }

    fn resolve_one(&self, s: &ScenarioSpec, known_policy: &impl Fn(&str) -> bool) -> Result<ScenarioConfig, HarnessError> {
        let err = |source| HarnessError::Config {
            scenario: s.name.clone(),
            source,
        };
        let (mut doc, config_dir) = match &s.config {
            Some(rel) => {
                let path = self.base_dir.join(rel);
                let text = std::fs::read_to_string(&path).map_err(|source| HarnessError::Io {
                    path: path.clone(),
                    source,
                })?;
                let doc: Value =
                    serde_yaml::from_str(&text).map_err(|e| err(crate::config::ConfigError::Parse(e.to_string())))?;
                (doc, path.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (Value::Mapping(Default::default()), self.base_dir.clone()),
        };
        if let Some(o) = &s.overrides {
            deep_merge(&mut doc, o.clone());
        }
        let raw = RawConfig::from_value(doc).map_err(err)?;
        let mut cfg = validate_config_with(raw, known_policy).map_err(err)?;
        if let Some(bt) = &cfg.bt_xml_path {
            if bt.is_relative() {
                cfg.bt_xml_path = Some(config_dir.join(bt));
            }
        }
        Ok(cfg)
    }
}

/// Mappings merge key by key; anything else replaces.
pub fn deep_merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Mapping(b), Value::Mapping(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
