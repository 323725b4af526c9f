use serde::{Deserialize, Serialize};

use super::{compound_probs, DistributionError};

const SUM_TOL: f64 = 1e-10;

/// Prior over the number of active latent dimensions `d in 1..=K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DimensionPrior {
    /// Explicit categorical probabilities, one per dimension.
    Explicit { probs: Vec<f64> },
    /// Beta-binomial compound with shape parameters `(a, b)`.
    Compound { a: f64, b: f64 },
}

impl DimensionPrior {
    pub fn compound(a: f64, b: f64) -> Self {
        Self::Compound { a, b }
    }

    pub fn validate(&self, k: usize) -> Result<(), DistributionError> {
        if k == 0 {
            return Err(DistributionError::ZeroDimension);
        }
        match self {
            Self::Explicit { probs } => {
                if probs.len() != k {
                    return Err(DistributionError::LengthMismatch(probs.len(), k));
                }
                if probs.iter().any(|&p| !(p >= 0.0)) {
                    return Err(DistributionError::InvalidProbabilities(
                        "negative prior probability".into(),
                    ));
                }
                let s: f64 = probs.iter().sum();
                if (s - 1.0).abs() > SUM_TOL {
                    return Err(DistributionError::InvalidProbabilities(format!(
                        "prior sums to {s}"
                    )));
                }
                Ok(())
            }
            Self::Compound { a, b } => {
                if !(*a > 0.0 && *b > 0.0) {
                    return Err(DistributionError::InvalidShape { a: *a, b: *b });
                }
                Ok(())
            }
        }
    }

    /// Categorical probabilities for a cap of `k` dimensions.
    pub fn probs(&self, k: usize) -> Result<Vec<f64>, DistributionError> {
        self.validate(k)?;
        match self {
            Self::Explicit { probs } => Ok(probs.clone()),
            Self::Compound { a, b } => compound_probs(*a, *b, k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_must_be_normalized() {
        let ok = DimensionPrior::Explicit {
            probs: vec![0.5, 0.5],
        };
        assert_eq!(ok.probs(2).unwrap(), vec![0.5, 0.5]);
        assert!(ok.probs(3).is_err());
        let bad = DimensionPrior::Explicit {
            probs: vec![0.5, 0.6],
        };
        assert!(bad.validate(2).is_err());
        assert!(DimensionPrior::compound(0.0, 1.0).validate(3).is_err());
    }

    #[test]
    fn serde_shape() {
        let p: DimensionPrior = serde_json::from_str(r#"{"kind":"compound","a":2.0,"b":2.0}"#).unwrap();
        assert_eq!(p, DimensionPrior::compound(2.0, 2.0));
        assert!(serde_json::from_str::<DimensionPrior>(r#"{"kind":"compound","a":2.0,"b":2.0,"c":1}"#).is_err());
    }
}
