//! Beta-binomial ("Polya urn") prior over the number of active dimensions.
//!
//! For a cap of `K` dimensions, `P(d = k)` for `k = 1..=K` is the
//! beta-binomial pmf of `k - 1` successes in `K - 1` trials:
//!
//! ```text
//! P(d = k) = C(K-1, k-1) * B(a + k - 1, b + K - k) / B(a, b)
//! ```
//!
//! Everything is evaluated in log space through log-gamma.

use statrs::function::gamma::{digamma, ln_gamma};

use crate::autograd::{Tensor, TensorError, Var};
use crate::scalar::Scalar;

use super::DistributionError;

fn check(a: f64, b: f64, k: usize) -> Result<(), DistributionError> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(DistributionError::InvalidShape { a, b });
    }
    if k == 0 {
        return Err(DistributionError::ZeroDimension);
    }
    Ok(())
}

fn ln_beta(x: f64, y: f64) -> f64 {
    ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)
}

fn log_probs_unchecked(a: f64, b: f64, k: usize) -> Vec<f64> {
    let n = (k - 1) as f64;
    let norm = ln_gamma(n + 1.0) - ln_beta(a, b);
    (1..=k)
        .map(|d| {
            let j = (d - 1) as f64;
            norm - ln_gamma(j + 1.0) - ln_gamma(n - j + 1.0) + ln_beta(a + j, b + n - j)
        })
        .collect()
}

/// `log P(d = k)` for `k = 1..=K`.
pub fn compound_log_probs(a: f64, b: f64, k: usize) -> Result<Vec<f64>, DistributionError> {
    check(a, b, k)?;
    Ok(log_probs_unchecked(a, b, k))
}

/// `P(d = k)` for `k = 1..=K`.
pub fn compound_probs(a: f64, b: f64, k: usize) -> Result<Vec<f64>, DistributionError> {
    Ok(compound_log_probs(a, b, k)?.into_iter().map(f64::exp).collect())
}

/// Partial derivatives of every `log P(d = k)` with respect to `a` and `b`.
pub fn compound_log_probs_grad(a: f64, b: f64, k: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (k - 1) as f64;
    let common = digamma(a + b) - digamma(a + b + n);
    let da = (0..k)
        .map(|j| digamma(a + j as f64) - digamma(a) + common)
        .collect();
    let db = (0..k)
        .map(|j| digamma(b + n - j as f64) - digamma(b) + common)
        .collect();
    (da, db)
}

/// Row-wise compound log-probabilities: `[rows, 2]` shape parameters
/// `(a, b)` to `[rows, K]` log-probabilities, differentiable in `(a, b)`.
pub fn compound_log_probs_var<'t, T: Scalar>(
    shape_params: Var<'t, T>,
    k: usize,
) -> Result<Var<'t, T>, TensorError> {
    let (value, jac) = {
        let ab = shape_params.value();
        if ab.last_dim() != 2 || ab.ndim() != 2 {
            return Err(TensorError::InvalidArgument {
                op: "compound_log_probs",
                reason: format!("expected [rows, 2] shape parameters, got {:?}", ab.shape()),
            });
        }
        if k == 0 {
            return Err(TensorError::InvalidArgument {
                op: "compound_log_probs",
                reason: "dimension cap must be at least 1".into(),
            });
        }
        let rows = ab.shape()[0];
        let mut value = Vec::with_capacity(rows * k);
        let mut jac = Vec::with_capacity(rows * 2 * k);
        for r in 0..rows {
            let (a, b) = (ab.row(r)[0].as_f64(), ab.row(r)[1].as_f64());
            if !(a > 0.0 && b > 0.0) {
                return Err(TensorError::InvalidArgument {
                    op: "compound_log_probs",
                    reason: format!("non-positive shape parameters ({a}, {b})"),
                });
            }
            value.extend(log_probs_unchecked(a, b, k).into_iter().map(T::of));
            let (da, db) = compound_log_probs_grad(a, b, k);
            jac.extend(da);
            jac.extend(db);
        }
        (Tensor::new(vec![rows, k], value)?, jac)
    };
    shape_params.custom_unary("compound_log_probs", value, move |g: &[T]| {
        let rows = g.len() / k;
        let mut out = Vec::with_capacity(rows * 2);
        for r in 0..rows {
            let gr = &g[r * k..(r + 1) * k];
            let da = &jac[r * 2 * k..r * 2 * k + k];
            let db = &jac[r * 2 * k + k..(r + 1) * 2 * k];
            let sa: f64 = gr.iter().zip(da).map(|(g, d)| g.as_f64() * d).sum();
            let sb: f64 = gr.iter().zip(db).map(|(g, d)| g.as_f64() * d).sum();
            out.push(T::of(sa));
            out.push(T::of(sb));
        }
        out
    })
}
