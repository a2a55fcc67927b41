//! The run configuration: one JSON document, every key overridable by a
//! flag.

use std::fmt::Debug;
use std::path::{Path, PathBuf};

use gecdi::adapter::RemoteConfig;
use gecdi::channel::ChannelConfig;
use gecdi::decoder::{CriticConfig, DecodeConfig};
use gecdi::error::Error;
use gecdi::experiment::Grid;
use gecdi::ged::logreg::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NgramSettings {
    pub order: usize,
    pub add_k: f64,
}

impl Default for NgramSettings {
    fn default() -> Self {
        Self { order: 3, add_k: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GedDataSettings {
    pub k: usize,
    pub beam_width: usize,
    pub train_fraction: f64,
}

impl Default for GedDataSettings {
    fn default() -> Self {
        Self {
            k: 12,
            beam_width: 12,
            train_fraction: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gec_model: Option<PathBuf>,
    pub lm_model: Option<PathBuf>,
    pub ged_model: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub min_count: usize,
    pub channel: ChannelConfig,
    pub ngram: NgramSettings,
    pub ged_data: GedDataSettings,
    pub ged_train: TrainConfig,
    pub decode: DecodeConfig,
    pub lm: CriticConfig,
    pub ged: CriticConfig,
    pub remote: RemoteConfig,
    pub sweep: Grid,
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gec_model: None,
            lm_model: None,
            ged_model: None,
            output_dir: None,
            min_count: 1,
            channel: ChannelConfig::default(),
            ngram: NgramSettings::default(),
            ged_data: GedDataSettings::default(),
            ged_train: TrainConfig::default(),
            decode: DecodeConfig::default(),
            lm: CriticConfig::default(),
            ged: CriticConfig::default(),
            remote: RemoteConfig::default(),
            sweep: Grid::default(),
            seeds: vec![0, 1, 2, 3],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must not be empty".into()));
        }
        for p in [&self.gec_model, &self.lm_model, &self.ged_model].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::InvalidConfig(format!(
                    "configured file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}

/// Applies flag values over configuration values. A flag that changes a
/// value the configuration file had set is logged.
pub struct Overrides {
    from_file: bool,
}

impl Overrides {
    pub fn new(from_file: bool) -> Self {
        Self { from_file }
    }

    pub fn set<T: PartialEq + Debug>(&self, slot: &mut T, flag: Option<T>, name: &str) {
        if let Some(v) = flag {
            if self.from_file && *slot != v {
                log::info!("--{name} overrides the configured value {slot:?} with {v:?}");
            }
            *slot = v;
        }
    }

    pub fn set_path(&self, slot: &mut Option<PathBuf>, flag: Option<PathBuf>, name: &str) {
        if let Some(p) = flag {
            if self.from_file && slot.as_ref().is_some_and(|s| *s != p) {
                log::info!(
                    "--{name} overrides the configured path {} with {}",
                    slot.as_ref().unwrap().display(),
                    p.display()
                );
            }
            *slot = Some(p);
        }
    }
}
