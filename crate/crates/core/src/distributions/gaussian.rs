use rand::Rng;
use rand_distr::StandardNormal;

use crate::autograd::{TensorError, Var};
use crate::scalar::Scalar;

use super::DistributionError;

/// Gaussian with diagonal covariance `diag(sigma^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self, DistributionError> {
        if mu.len() != sigma.len() {
            return Err(DistributionError::LengthMismatch(mu.len(), sigma.len()));
        }
        if sigma.iter().any(|&s| !(s > 0.0)) {
            return Err(DistributionError::NonPositiveSigma);
        }
        Ok(Self { mu, sigma })
    }

    pub fn standard(k: usize) -> Self {
        Self {
            mu: vec![0.0; k],
            sigma: vec![1.0; k],
        }
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// KL(q || p) restricted to the first `dims` coordinates, i.e. the divergence
/// between the `dims`-dimensional marginals. `dims = 0` gives 0.
pub fn gaussian_kl(q: &DiagGaussian, p: &DiagGaussian, dims: usize) -> Result<f64, DistributionError> {
    if q.dim() != p.dim() {
        return Err(DistributionError::LengthMismatch(q.dim(), p.dim()));
    }
    if dims > q.dim() {
        return Err(DistributionError::TooManyDims {
            dims,
            len: q.dim(),
        });
    }
    Ok((0..dims)
        .map(|l| {
            let (qm, qs, pm, ps) = (q.mu[l], q.sigma[l], p.mu[l], p.sigma[l]);
            (ps / qs).ln() + (qs * qs + (qm - pm).powi(2)) / (2.0 * ps * ps) - 0.5
        })
        .sum())
}

/// Reparameterized draw `mu + sigma * eps`, `eps ~ N(0, I)`.
pub fn gaussian_rsample<R: Rng + ?Sized>(g: &DiagGaussian, rng: &mut R) -> Vec<f64> {
    g.mu
        .iter()
        .zip(&g.sigma)
        .map(|(&m, &s)| {
            let eps: f64 = rng.sample(StandardNormal);
            m + s * eps
        })
        .collect()
}

/// Elementwise `KL(N(mu, sigma^2) || N(0, 1))`, same shape as the inputs.
pub fn standard_normal_kl_var<'t, T: Scalar>(
    mu: Var<'t, T>,
    sigma: Var<'t, T>,
) -> Result<Var<'t, T>, TensorError> {
    let quad = sigma.square()?.add(mu.square()?)?.scale(0.5)?;
    quad.sub(sigma.log()?)?.offset(-0.5)
}
