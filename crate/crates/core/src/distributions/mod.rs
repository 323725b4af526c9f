//! Closed-form densities, divergences and samplers used by the latent layer.
//!
//! Plain `f64` functions serve as the reference implementations; the `*_var`
//! functions are the differentiable counterparts used inside the loss.

mod categorical;
mod compound;
mod gaussian;
mod gumbel;
mod prior;

pub use categorical::{categorical_kl, categorical_kl_var};
pub use compound::{
    compound_log_probs, compound_log_probs_grad, compound_log_probs_var, compound_probs,
};
pub use gaussian::{gaussian_kl, gaussian_rsample, standard_normal_kl_var, DiagGaussian};
pub use gumbel::{gumbel_noise, gumbel_softmax_sample, gumbel_softmax_var, RelaxedCategorical};
pub use prior::DimensionPrior;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("shape parameters must be positive and finite, got a={a}, b={b}")]
    InvalidShape { a: f64, b: f64 },
    #[error("dimension cap must be at least 1")]
    ZeroDimension,
    #[error("requested {dims} coordinates of a {len}-dimensional distribution")]
    TooManyDims { dims: usize, len: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("standard deviations must be strictly positive")]
    NonPositiveSigma,
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("q puts mass {mass} on index {index} where p is zero")]
    SupportViolation { index: usize, mass: f64 },
    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),
}
