//! Distribution-shift scenarios, the PGD attack and evaluation metrics.

mod eval;
mod records;
mod transforms;

pub use eval::{evaluate, metrics, pgd_attack, EvalOptions, Metrics};
pub use records::{parse_records, records_to_csv, EvalRecord, CSV_HEADER};
pub use transforms::{rotate, shot_noise, shot_noise_lambda, SHOT_NOISE_LAMBDAS};

use std::fmt;

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum OodError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("shot-noise level {0} out of range 1..=8")]
    LevelRange(usize),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("results CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("results CSV is missing column `{0}`")]
    MissingColumn(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One evaluation condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scenario {
    Clean,
    /// Level `1..=8` of [`SHOT_NOISE_LAMBDAS`].
    ShotNoise { level: usize },
    Rotation { degrees: f64 },
    /// L-infinity PGD; `step` defaults to `epsilon` for one iteration and
    /// `epsilon / 4` otherwise.
    Pgd {
        epsilon: f64,
        iterations: usize,
        step: Option<f64>,
    },
}

impl Scenario {
    pub fn pgd(epsilon: f64, iterations: usize) -> Self {
        Self::Pgd {
            epsilon,
            iterations,
            step: None,
        }
    }

    /// `scenario` column value; PGD carries its iteration count.
    pub fn label(&self) -> String {
        match self {
            Self::Clean => "clean".into(),
            Self::ShotNoise { .. } => "shot-noise".into(),
            Self::Rotation { .. } => "rotation".into(),
            Self::Pgd { iterations, .. } => format!("pgd-{iterations}"),
        }
    }

    /// `severity` column value.
    pub fn severity(&self) -> f64 {
        match *self {
            Self::Clean => 0.0,
            Self::ShotNoise { level } => level as f64,
            Self::Rotation { degrees } => degrees,
            Self::Pgd { epsilon, .. } => epsilon,
        }
    }

    pub fn step_size(&self) -> Option<f64> {
        match *self {
            Self::Pgd {
                epsilon,
                iterations,
                step,
            } => Some(step.unwrap_or(if iterations == 1 { epsilon } else { epsilon / 4.0 })),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), OodError> {
        match *self {
            Self::Clean => Ok(()),
            Self::ShotNoise { level } if (1..=SHOT_NOISE_LAMBDAS.len()).contains(&level) => Ok(()),
            Self::ShotNoise { level } => Err(OodError::LevelRange(level)),
            Self::Rotation { degrees } if degrees.is_finite() => Ok(()),
            Self::Pgd {
                epsilon,
                iterations,
                step,
            } if epsilon >= 0.0
                && epsilon.is_finite()
                && iterations >= 1
                && step.map_or(true, |s| s >= 0.0 && s.is_finite()) =>
            {
                Ok(())
            }
            _ => Err(OodError::InvalidScenario(self.to_string())),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Clean => write!(f, "clean"),
            Self::ShotNoise { level } => write!(f, "shot-noise level {level}"),
            Self::Rotation { degrees } => write!(f, "rotation {degrees} degrees"),
            Self::Pgd {
                epsilon, iterations, ..
            } => write!(
                f,
                "pgd eps {epsilon}, {iterations} iterations, step {}",
                self.step_size().unwrap_or(f64::NAN)
            ),
        }
    }
}
