//! Experiment configuration: defaults, validation, TOML loading, and the bin
//! presets.

use qloss::fit::LossKind;
use qloss::loss::BinSpec;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config error: {0}")]
    Invalid(String),
    #[error("failed to parse config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("failed to read config file: {0}")]
    Io(#[from] std::io::Error),
}

/// Support-point presets for the categorical loss. `Nonuniform5` concentrates
/// resolution near 1, where the transformed optimal values live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BinPreset {
    Uniform5,
    #[default]
    Nonuniform5,
    Custom,
}

impl BinPreset {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform5" => Some(BinPreset::Uniform5),
            "nonuniform5" => Some(BinPreset::Nonuniform5),
            "custom" => Some(BinPreset::Custom),
            _ => None,
        }
    }

    pub fn resolve(&self, custom: &[f64]) -> Result<BinSpec, ConfigError> {
        let boundaries = match self {
            BinPreset::Uniform5 => vec![0.2, 0.4, 0.6, 0.8],
            BinPreset::Nonuniform5 => vec![0.5, 0.8, 0.95, 0.99],
            BinPreset::Custom => custom.to_vec(),
        };
        BinSpec::new(boundaries)
            .map_err(|e| ConfigError::Invalid(format!("bad bin boundaries: {e}")))
    }
}

/// Full experiment configuration. Every field has a default, so a config file
/// (or the CLI) only needs to override what it cares about.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Losses to sweep, as `sq`, `log`, `cat`.
    pub losses: Vec<String>,
    /// Dataset-size grid in episodes.
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub feature_order: usize,
    pub bins: BinPreset,
    /// Boundaries used when `bins = custom`.
    pub custom_bins: Vec<f64>,
    pub gamma: f64,
    pub iterations: usize,
    pub eval_horizon: usize,
    pub eval_rollouts: usize,
    pub seed: u64,
    pub l2_sq: f64,
    pub l2_log: f64,
    pub l2_cat: f64,
    pub warm_start: bool,
    pub out_dir: PathBuf,
    /// Worker threads for the replication grid; 0 = one per core.
    pub jobs: usize,
    /// Sample-size grid for the counterexample Monte Carlo.
    pub mc_sizes: Vec<usize>,
    /// Sample-size grid for the rate sweep.
    pub rate_sizes: Vec<usize>,
    pub mc_trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            losses: vec!["sq".into(), "log".into(), "cat".into()],
            sizes: vec![10, 25, 50, 100, 200, 400],
            replications: 45,
            feature_order: 2,
            bins: BinPreset::Nonuniform5,
            custom_bins: Vec::new(),
            gamma: 0.99,
            iterations: 50,
            eval_horizon: 3000,
            eval_rollouts: 20,
            seed: 20240901,
            l2_sq: 1e-6,
            l2_log: 1e-6,
            l2_cat: 1e-4,
            warm_start: false,
            out_dir: PathBuf::from("out"),
            jobs: 0,
            mc_sizes: vec![25, 100, 400],
            rate_sizes: vec![25, 100, 400, 1600],
            mc_trials: 100_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        Ok(config)
    }

    pub fn from_toml_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn loss_kinds(&self) -> Result<Vec<LossKind>, ConfigError> {
        self.losses
            .iter()
            .map(|s| {
                LossKind::parse(s)
                    .ok_or_else(|| ConfigError::Invalid(format!("unknown loss {s:?}")))
            })
            .collect()
    }

    pub fn l2_for(&self, loss: LossKind) -> f64 {
        match loss {
            LossKind::Squared => self.l2_sq,
            LossKind::Log => self.l2_log,
            LossKind::Cat => self.l2_cat,
        }
    }

    pub fn bin_spec(&self) -> Result<BinSpec, ConfigError> {
        self.bins.resolve(&self.custom_bins)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let kinds = self.loss_kinds()?;
        if kinds.is_empty() {
            return Err(ConfigError::Invalid("loss list is empty".into()));
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|s| *s == 0) {
            return Err(ConfigError::Invalid(
                "dataset-size grid must be non-empty with all entries >= 1".into(),
            ));
        }
        if self.replications == 0 {
            return Err(ConfigError::Invalid("replications must be >= 1".into()));
        }
        if !(2..=3).contains(&self.feature_order) {
            return Err(ConfigError::Invalid(format!(
                "feature order must be 2 or 3, got {}",
                self.feature_order
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(ConfigError::Invalid(format!(
                "gamma must be in [0, 1), got {}",
                self.gamma
            )));
        }
        if self.iterations == 0 || self.eval_horizon == 0 || self.eval_rollouts == 0 {
            return Err(ConfigError::Invalid(
                "iterations, eval_horizon, and eval_rollouts must be >= 1".into(),
            ));
        }
        if [self.l2_sq, self.l2_log, self.l2_cat]
            .iter()
            .any(|l| !(l.is_finite() && *l >= 0.0))
        {
            return Err(ConfigError::Invalid("l2 strengths must be >= 0".into()));
        }
        if self.mc_sizes.is_empty() || self.rate_sizes.is_empty() || self.mc_trials == 0 {
            return Err(ConfigError::Invalid(
                "Monte Carlo grids and trial count must be non-empty".into(),
            ));
        }
        self.bin_spec()?;
        Ok(())
    }
}
