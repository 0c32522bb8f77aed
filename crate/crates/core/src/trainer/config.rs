use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::setloss::LossKind;
use crate::shiftnet::{ModelConfig, Strategy, D};

/// Optimisation and objective settings. Defaults are the published
/// hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the set loss on the weak stream.
    pub lambda: f64,
    pub batch_labeled: usize,
    pub batch_weak: usize,
    pub peak_lr: f64,
    pub warmup_ratio: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub grad_clip_norm: f64,
    pub epochs: usize,
    /// Overrides `epochs` when set.
    pub total_steps: Option<usize>,
    pub seed: u64,
    pub loss_kind: LossKind,
    pub hidden: usize,
    pub strategy: Strategy,
    pub skip: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 16.0,
            batch_labeled: 4,
            batch_weak: 16,
            peak_lr: 4e-4,
            warmup_ratio: 0.03,
            adam_betas: (0.9, 0.99),
            adam_eps: 1e-6,
            weight_decay: 1e-4,
            grad_clip_norm: 1.0,
            epochs: 10,
            total_steps: None,
            seed: 0,
            loss_kind: LossKind::default(),
            hidden: 128,
            strategy: Strategy::None,
            skip: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self, TrainConfigError> {
        let cfg: TrainConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, TrainConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| TrainConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), TrainConfigError> {
        let bad = |m: &str| Err(TrainConfigError::Invalid(m.to_string()));
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if self.batch_labeled == 0 || self.batch_weak == 0 {
            return bad("batch sizes must be positive");
        }
        if !(self.peak_lr > 0.0) {
            return bad("peak_lr must be positive");
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return bad("warmup_ratio must lie in [0, 1)");
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.hidden == 0 {
            return bad("hidden width must be positive");
        }
        if let LossKind::Huber { delta } = self.loss_kind {
            if !(delta > 0.0) {
                return bad("huber delta must be positive");
            }
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            input_dim: D,
            hidden: self.hidden,
            strategy: self.strategy,
            skip: self.skip,
        }
    }
}
