//! Minibatch training, β sweeps and information-curve summaries.

mod curve;
mod optim;
mod toy;
mod trainer;

pub use curve::{
    info_curve, posterior_dim_mode, select_beta_mni, select_beta_mni_with, InfoCurve, InfoCurvePoint,
};
pub use optim::{clip_global_norm, Optimizer, OptimizerConfig};
pub use toy::{toy_spec, toy_two_class};
pub use trainer::{fit, train, EpochRecord, History};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::model::ModelError;
use crate::ood::OodError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}, step {step}: {term} is {value}")]
    Divergence {
        epoch: usize,
        step: usize,
        term: String,
        value: f64,
    },
    #[error("dataset has {found} pixels per image, model expects {expected}")]
    DataShape { expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] OodError),
}

/// Gumbel-softmax / relaxed-Bernoulli temperature per epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TauSchedule {
    Constant { value: f64 },
    /// `max(end, start * exp(-rate * (epoch - 1)))`.
    Anneal { start: f64, end: f64, rate: f64 },
}

impl Default for TauSchedule {
    fn default() -> Self {
        Self::Constant { value: 0.5 }
    }
}

impl TauSchedule {
    /// Temperature of 1-based `epoch`.
    pub fn at(&self, epoch: usize) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Anneal { start, end, rate } => {
                (start * (-rate * (epoch.saturating_sub(1)) as f64).exp()).max(end)
            }
        }
    }

    fn validate(&self) -> Result<(), TrainError> {
        let ok = match *self {
            Self::Constant { value } => value > 0.0,
            Self::Anneal { start, end, rate } => start > 0.0 && end > 0.0 && rate >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(TrainError::InvalidConfig(format!("temperatures must be positive: {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "TrainConfig::default_epochs")]
    pub epochs: usize,
    #[serde(default = "TrainConfig::default_batch")]
    pub batch_size: usize,
    #[serde(default = "TrainConfig::default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tau: TauSchedule,
    /// Global gradient-norm cap; `None` disables clipping.
    #[serde(default = "TrainConfig::default_clip")]
    pub grad_clip: Option<f64>,
    /// β values for sweeps.
    #[serde(default)]
    pub beta_grid: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: Self::default_epochs(),
            batch_size: Self::default_batch(),
            learning_rate: Self::default_lr(),
            optimizer: OptimizerConfig::default(),
            seed: 0,
            tau: TauSchedule::default(),
            grad_clip: Self::default_clip(),
            beta_grid: Vec::new(),
        }
    }
}

impl TrainConfig {
    fn default_epochs() -> usize {
        50
    }
    fn default_batch() -> usize {
        128
    }
    fn default_lr() -> f64 {
        1e-4
    }
    fn default_clip() -> Option<f64> {
        Some(5.0)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(TrainError::InvalidConfig(format!("grad_clip must be positive, got {c}")));
            }
        }
        if let Some(b) = self.beta_grid.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return Err(TrainError::InvalidConfig(format!("beta_grid entry {b} is not a finite nonnegative number")));
        }
        self.tau.validate()
    }
}
