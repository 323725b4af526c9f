use rand::Rng;

use crate::distributions::{
    compound_log_probs, gaussian_rsample, gumbel_softmax_sample, DiagGaussian, DistributionError,
    RelaxedCategorical,
};

/// Output of the dimension encoder for one datum.
#[derive(Clone, Debug, PartialEq)]
pub enum DimHead {
    /// `K` softmax logits.
    Logits(Vec<f64>),
    /// Learned compound shape parameters.
    Compound { a: f64, b: f64 },
}

/// Encoder output for one datum of a spike-slab model.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderOutput {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub dim: DimHead,
}

impl EncoderOutput {
    pub fn k(&self) -> usize {
        self.mu.len()
    }

    /// Normalized `log pi_k(x)` for `k = 1..=K`.
    pub fn log_pi(&self) -> Result<Vec<f64>, DistributionError> {
        match &self.dim {
            DimHead::Logits(l) => {
                let m = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + l.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                Ok(l.iter().map(|v| v - lse).collect())
            }
            DimHead::Compound { a, b } => compound_log_probs(*a, *b, self.k()),
        }
    }

    pub fn pi(&self) -> Result<Vec<f64>, DistributionError> {
        Ok(self.log_pi()?.into_iter().map(f64::exp).collect())
    }

    /// Posterior mode of the dimension, 1-based.
    pub fn dim_mode(&self) -> Result<usize, DistributionError> {
        Ok(argmax(&self.log_pi()?) + 1)
    }
}

/// One draw of the spike-slab latent.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentSample {
    pub a: Vec<f64>,
    pub d_soft: Vec<f64>,
    pub gamma: Vec<f64>,
    pub z: Vec<f64>,
    /// `argmax d_soft`, 1-based.
    pub d_hard: usize,
}

/// `gamma_k = sum_{j >= k} d_soft_j`: the probability that `d >= k`.
pub fn mask_from_dsoft(d_soft: &[f64]) -> Vec<f64> {
    let mut gamma = d_soft.to_vec();
    let mut acc = 0.0;
    for g in gamma.iter_mut().rev() {
        acc += *g;
        *g = acc.min(1.0);
    }
    gamma
}

/// Draws `A ~ N(mu, sigma^2)`, a relaxed one-hot `d_soft` at temperature
/// `tau`, and returns `Z = A * mask_from_dsoft(d_soft)`.
pub fn sample_latent<R: Rng + ?Sized>(
    enc: &EncoderOutput,
    tau: f64,
    rng: &mut R,
) -> Result<LatentSample, DistributionError> {
    let slab = DiagGaussian::new(enc.mu.clone(), enc.sigma.clone())?;
    let a = gaussian_rsample(&slab, rng);
    let rc = RelaxedCategorical::new(enc.log_pi()?, tau)?;
    let d_soft = gumbel_softmax_sample(&rc, rng);
    let gamma = mask_from_dsoft(&d_soft);
    let z = a.iter().zip(&gamma).map(|(x, g)| x * g).collect();
    let d_hard = argmax(&d_soft) + 1;
    Ok(LatentSample {
        a,
        d_soft,
        gamma,
        z,
        d_hard,
    })
}

/// `sum_k pi_k sum_{l <= k} kl_l`, the expected slab KL when only the first
/// `d` coordinates are active.
pub fn term_ii_closed(pi: &[f64], kl: &[f64]) -> f64 {
    let mut prefix = 0.0;
    let mut total = 0.0;
    for (p, k) in pi.iter().zip(kl) {
        prefix += k;
        total += p * prefix;
    }
    total
}

pub(super) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
