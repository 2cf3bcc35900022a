//! TOML run configuration. Every section and field is optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sqac_core::loglab::{SynthSpec, DEFAULT_K_THRESHOLD};
use sqac_core::ranker::{L1Weights, L2Config};
use sqac_core::seasonnet::TrainConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub synth: SynthSpec,
    pub ingest: IngestConfig,
    pub train: TrainConfig,
    pub l1_weights: L1Weights,
    pub l2: L2Config,
    pub eval: EvalConfig,
    pub service: ServiceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub k_threshold: u64,
    pub sample_fraction: f64,
    pub sample_seed: u64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            k_threshold: DEFAULT_K_THRESHOLD,
            sample_fraction: 1.0,
            sample_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_cases: usize,
    pub case_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_cases: 2000,
            case_seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub model: Option<PathBuf>,
    pub index: Option<PathBuf>,
    /// Month for requests that omit one; the wall clock when unset.
    pub month: Option<u8>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            model: None,
            index: None,
            month: None,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies one seed to every randomized stage.
    pub fn reseed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.ingest.sample_seed = seed;
        self.train.seed = seed;
        self.eval.case_seed = seed;
    }
}
