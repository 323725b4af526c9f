use rand::distr::Open01;
use rand::Rng;

use crate::autograd::{TensorError, Var};
use crate::scalar::Scalar;

use super::DistributionError;

/// Concrete / Gumbel-softmax relaxation of a categorical with the given logits.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedCategorical {
    logits: Vec<f64>,
    temperature: f64,
}

impl RelaxedCategorical {
    pub fn new(logits: Vec<f64>, temperature: f64) -> Result<Self, DistributionError> {
        if !(temperature > 0.0) {
            return Err(DistributionError::InvalidTemperature(temperature));
        }
        Ok(Self {
            logits,
            temperature,
        })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Relaxed one-hot for a fixed noise draw.
    pub fn relax(&self, noise: &[f64]) -> Vec<f64> {
        let t = self.temperature;
        let z: Vec<f64> = self
            .logits
            .iter()
            .zip(noise)
            .map(|(&l, &g)| (l + g) / t)
            .collect();
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }
}

/// Standard Gumbel draws `-ln(-ln u)`, `u ~ U(0, 1)` exclusive.
pub fn gumbel_noise<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            -(-u.ln()).ln()
        })
        .collect()
}

pub fn gumbel_softmax_sample<R: Rng + ?Sized>(rc: &RelaxedCategorical, rng: &mut R) -> Vec<f64> {
    let noise = gumbel_noise(rng, rc.logits.len());
    rc.relax(&noise)
}

/// `softmax((logits + noise) / tau)` row-wise; `noise` is a constant of the
/// same shape as `logits`.
pub fn gumbel_softmax_var<'t, T: Scalar>(
    logits: Var<'t, T>,
    noise: Var<'t, T>,
    tau: f64,
) -> Result<Var<'t, T>, TensorError> {
    if !(tau > 0.0) {
        return Err(TensorError::InvalidArgument {
            op: "gumbel_softmax",
            reason: format!("temperature must be positive, got {tau}"),
        });
    }
    logits.add(noise)?.scale(1.0 / tau)?.softmax()
}
