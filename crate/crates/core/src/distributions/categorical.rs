use crate::autograd::{TensorError, Var};
use crate::scalar::Scalar;

use super::DistributionError;

const SUM_TOL: f64 = 1e-6;

fn validate(name: &str, p: &[f64]) -> Result<(), DistributionError> {
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(DistributionError::InvalidProbabilities(format!(
            "{name} has a negative or non-finite entry"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(DistributionError::InvalidProbabilities(format!(
            "{name} sums to {s}"
        )));
    }
    Ok(())
}

/// `sum_k q_k log(q_k / p_k)` with `0 log(0 / .) = 0`. Mass of `q` where `p`
/// is zero makes the divergence infinite and is reported as an error.
pub fn categorical_kl(q: &[f64], p: &[f64]) -> Result<f64, DistributionError> {
    if q.len() != p.len() {
        return Err(DistributionError::LengthMismatch(q.len(), p.len()));
    }
    validate("q", q)?;
    validate("p", p)?;
    let mut kl = 0.0;
    for (index, (&qk, &pk)) in q.iter().zip(p).enumerate() {
        if qk == 0.0 {
            continue;
        }
        if pk == 0.0 {
            return Err(DistributionError::SupportViolation { index, mass: qk });
        }
        kl += qk * (qk / pk).ln();
    }
    Ok(kl.max(0.0))
}

/// Row-wise categorical KL from log-probabilities: `[rows, K]` posterior
/// log-probs against a constant `[K]` prior log-prob vector, giving `[rows]`.
pub fn categorical_kl_var<'t, T: Scalar>(
    log_q: Var<'t, T>,
    log_p: Var<'t, T>,
) -> Result<Var<'t, T>, TensorError> {
    let q = log_q.exp()?;
    q.mul(log_q.sub(log_p)?)?.sum_last()
}
