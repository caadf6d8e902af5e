use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SyntheticConfig;
use crate::dppsgd::C_GRID;
use crate::error::{Error, Result};
use crate::gbdt::GbdtParams;
use crate::model::Algorithm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AlgorithmChoice {
    Dppsgd,
    Amp,
    Both,
}

impl AlgorithmChoice {
    pub fn algorithms(self) -> Vec<Algorithm> {
        match self {
            AlgorithmChoice::Dppsgd => vec![Algorithm::Dppsgd],
            AlgorithmChoice::Amp => vec![Algorithm::Amp],
            AlgorithmChoice::Both => vec![Algorithm::Dppsgd, Algorithm::Amp],
        }
    }
}

/// Which model of the target partner goes into its own ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetModel {
    /// The target's private model, like every other base model.
    Private,
    /// The target's non-private model; its data is public to itself.
    NonPrivate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationSettings {
    pub bias: f64,
    /// Fixed outlier threshold. When absent it is the `reference_quantile` of
    /// squared norms over the generator's public reference sample.
    pub t_norm: Option<f64>,
    pub reference_quantile: f64,
    pub reference_size: usize,
}

impl Default for NormalizationSettings {
    fn default() -> Self {
        NormalizationSettings {
            bias: 1.0,
            t_norm: None,
            reference_quantile: 0.99,
            reference_size: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSettings {
    pub trials: usize,
    pub epsilon: f64,
    pub records: usize,
    pub bins: usize,
    pub randomized_response_epsilon: f64,
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings {
            trials: 100_000,
            epsilon: 0.5,
            records: 50,
            bins: 20,
            randomized_response_epsilon: 1.0,
        }
    }
}

/// Mirrors the fields of an experiment run. Loaded from TOML; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub algorithm: AlgorithmChoice,
    /// Noisy ε values for experiment 1; the no-noise row is always added.
    pub epsilon_grid: Vec<f64>,
    pub epsilon_main: f64,
    pub n_splits: usize,
    pub n_noise_draws: usize,
    pub test_fraction: f64,
    pub partner_counts: Vec<usize>,
    pub n_subsample_repeats: usize,
    pub c_grid: Vec<f64>,
    pub target_model: TargetModel,
    /// Also run the variant where the target uses its ramped-up data.
    pub ramped_variant: bool,
    /// Stacker training rows are subsampled to at most this many.
    pub stacker_max_rows: usize,
    pub gbdt: GbdtParams,
    pub generator: SyntheticConfig,
    pub normalization: NormalizationSettings,
    /// Load `<partner>_<ramped|cold>.csv` files from here instead of generating.
    pub data_dir: Option<PathBuf>,
    pub audit: AuditSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 2019,
            algorithm: AlgorithmChoice::Dppsgd,
            epsilon_grid: vec![1e-6, 1e-4, 1e-2, 0.1, 0.4],
            epsilon_main: 0.01,
            n_splits: 10,
            n_noise_draws: 100,
            test_fraction: 0.2,
            partner_counts: vec![5, 10, 15, 20, 25, 30, 35],
            n_subsample_repeats: 100,
            c_grid: C_GRID.to_vec(),
            target_model: TargetModel::Private,
            ramped_variant: true,
            stacker_max_rows: 10_000,
            gbdt: GbdtParams::default(),
            generator: SyntheticConfig::default(),
            normalization: NormalizationSettings::default(),
            data_dir: None,
            audit: AuditSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Configuration(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Configuration(msg));
        if self.epsilon_grid.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return bad(format!("epsilon grid must hold finite positive values: {:?}", self.epsilon_grid));
        }
        if !(self.epsilon_main > 0.0) || !self.epsilon_main.is_finite() {
            return bad(format!("epsilon_main must be finite and positive, got {}", self.epsilon_main));
        }
        if self.n_splits == 0 || self.n_noise_draws == 0 || self.n_subsample_repeats == 0 {
            return bad("n_splits, n_noise_draws and n_subsample_repeats must be positive".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} outside (0, 1)", self.test_fraction));
        }
        if self.partner_counts.iter().any(|&k| k == 0) {
            return bad("partner counts must be positive".into());
        }
        if self.c_grid.is_empty() || self.c_grid.iter().any(|c| !(*c > 0.0)) {
            return bad("C grid must be non-empty and positive".into());
        }
        if self.stacker_max_rows < 10 {
            return bad(format!("stacker_max_rows must be at least 10, got {}", self.stacker_max_rows));
        }
        self.gbdt.validate()?;
        if self.data_dir.is_none() {
            self.generator.validate()?;
        }
        if !(self.normalization.bias > 0.0) {
            return bad("normalization bias must be positive".into());
        }
        if let Some(t) = self.normalization.t_norm {
            if !(t > 0.0) {
                return bad(format!("t_norm must be positive, got {t}"));
            }
        } else if self.data_dir.is_some() {
            return bad("loading CSV data requires an explicit normalization.t_norm".into());
        }
        Ok(())
    }
}
