//! Flat `key = value` configuration files for `train`.
//!
//! A config file is a list of `key = value` lines; `#` starts a comment and
//! blank lines are skipped. Unknown and duplicate keys are rejected so a
//! typo surfaces as an error instead of silently keeping a default. Every
//! hyperparameter defaults to the published protocol value:
//!
//! ```text
//! cache               = (no default; this or data_dir is required)
//! data_dir            = (no default)
//! output_dir          = runs
//! approach            = all            # all | fpz_cz | pz_oz | dual
//! learning_rate       = 0.001
//! batch_size          = 20
//! max_epochs          = 100
//! patience            = 10
//! validation_fraction = 0.1
//! seed                = 1
//! workers             = 0              # fold-level threads; 0 = one per core
//! standardize         = zscore         # zscore | none (used with data_dir)
//! force               = false
//! ```

use crate::error::{CliError, Result};
use somnoscore::dataset::{Approach, StandardizeMode};
use somnoscore::training::TrainConfig;
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// A full training-run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Segment cache produced by `prepare` (preferred input).
    pub cache: Option<PathBuf>,
    /// Raw corpus directory, segmented on the fly when no cache is given.
    pub data_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub approaches: Vec<Approach>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Worker threads for fold-level parallelism; 0 means one per core.
    pub workers: usize,
    /// Scaling applied when segmenting `data_dir`; caches are already scaled.
    pub standardize: StandardizeMode,
    pub force: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cache: None,
            data_dir: None,
            output_dir: PathBuf::from("runs"),
            approaches: Approach::ALL.to_vec(),
            learning_rate: 0.001,
            batch_size: 20,
            max_epochs: 100,
            patience: 10,
            validation_fraction: 0.1,
            seed: 1,
            workers: 0,
            standardize: StandardizeMode::PerRecordingZscore,
            force: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        for (key, value) in parse_key_values(text)? {
            match key.as_str() {
                "cache" => config.cache = Some(PathBuf::from(&value)),
                "data_dir" => config.data_dir = Some(PathBuf::from(&value)),
                "output_dir" => config.output_dir = PathBuf::from(&value),
                "approach" => config.approaches = parse_approaches(&value)?,
                "learning_rate" => config.learning_rate = parse_value(&key, &value)?,
                "batch_size" => config.batch_size = parse_value(&key, &value)?,
                "max_epochs" => config.max_epochs = parse_value(&key, &value)?,
                "patience" => config.patience = parse_value(&key, &value)?,
                "validation_fraction" => {
                    config.validation_fraction = parse_value(&key, &value)?;
                }
                "seed" => config.seed = parse_value(&key, &value)?,
                "workers" => config.workers = parse_value(&key, &value)?,
                "standardize" => config.standardize = parse_standardize(&value)?,
                "force" => config.force = parse_value(&key, &value)?,
                other => {
                    return Err(CliError::usage(format!("unknown configuration key {other:?}")));
                }
            }
        }
        if config.cache.is_none() && config.data_dir.is_none() {
            return Err(CliError::usage("config must set cache or data_dir"));
        }
        Ok(config)
    }

    /// The library-level hyperparameters for one approach.
    pub fn train_config(&self, approach: Approach) -> TrainConfig {
        TrainConfig {
            approach,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            validation_fraction: self.validation_fraction,
            seed: self.seed,
            standardize: self.standardize,
        }
    }
}

/// Splits flat `key = value` text, stripping `#` comments.
fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!("config line {}: expected key = value, found {raw:?}", i + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(CliError::usage(format!(
                "config line {}: empty key or value in {raw:?}",
                i + 1
            )));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(CliError::usage(format!("config line {}: duplicate key {key:?}", i + 1)));
        }
    }
    Ok(map)
}

fn parse_value<T>(key: &str, value: &str) -> Result<T>
where
    T: FromStr,
    T::Err: Debug,
{
    value.parse().map_err(|e| {
        CliError::usage(format!("config key {key}: cannot parse {value:?} ({e:?})"))
    })
}

fn parse_approaches(value: &str) -> Result<Vec<Approach>> {
    if value == "all" {
        return Ok(Approach::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in value.split(',').map(str::trim) {
        let approach = Approach::from_name(name).ok_or_else(|| {
            CliError::usage(format!(
                "unknown approach {name:?} (expected all, fpz_cz, pz_oz, or dual)"
            ))
        })?;
        if out.contains(&approach) {
            return Err(CliError::usage(format!("approach {name:?} listed twice")));
        }
        out.push(approach);
    }
    Ok(out)
}

/// Shared parser for `--standardize` flags and the `standardize` key.
pub fn parse_standardize(value: &str) -> Result<StandardizeMode> {
    match value {
        "zscore" | "per_recording_zscore" => Ok(StandardizeMode::PerRecordingZscore),
        "none" => Ok(StandardizeMode::None),
        other => Err(CliError::usage(format!(
            "unknown standardize mode {other:?} (expected zscore or none)"
        ))),
    }
}
