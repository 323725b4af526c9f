//! Spike-slab information-bottleneck classifier and its baselines.
//!
//! Every variant shares the same skeleton: an MLP encoder maps an image to
//! a latent code, an MLP decoder maps the (masked) code to class logits, and
//! the loss is cross-entropy plus `beta` times a compression term.
//!
//! - `cpib-categorical` / `cpib-compound`: Gaussian slab `A`, per-datum
//!   dimension distribution `pi(x)` from a second encoder, mask
//!   `gamma_k = P(d >= k)` and code `Z = A * gamma`.
//! - `vib-fixed`: Gaussian code of fixed width with a `N(0, I)` prior.
//! - `drop-vib`: deterministic features with a learned relaxed-Bernoulli
//!   keep mask per feature.
//! - `intel-vib`: Gaussian code multiplied by the output of a small
//!   dimension-selector network.

mod checkpoint;
mod latent;
mod network;
mod params;
mod spec;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use latent::{
    mask_from_dsoft, sample_latent, term_ii_closed, DimHead, EncoderOutput, LatentSample,
};
pub use network::{Bound, Encoded, LossParts, Mode, Model, Noise};
pub use params::{ParamInfo, Params};
pub use spec::{ModelSpec, Variant};

use thiserror::Error;

use crate::autograd::TensorError;
use crate::distributions::DistributionError;

/// Lower bound added to every softplus-parameterized standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Lower bound added to the learned compound shape parameters.
pub const SHAPE_FLOOR: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("operation needs a {expected} model, got {found}")]
    VariantMismatch { expected: &'static str, found: Variant },
    #[error("expected input width {expected}, got {found}")]
    InputWidth { expected: usize, found: usize },
    #[error("{len} labels for a batch of {batch}")]
    LabelCount { len: usize, batch: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelRange { label: usize, classes: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("unsupported checkpoint version {found} (this build reads {supported})")]
    CheckpointVersion { found: u32, supported: u32 },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
