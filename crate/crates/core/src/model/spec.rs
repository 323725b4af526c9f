use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::DimensionPrior;

use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    CpibCategorical,
    CpibCompound,
    VibFixed,
    DropVib,
    IntelVib,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::CpibCategorical,
        Variant::CpibCompound,
        Variant::VibFixed,
        Variant::DropVib,
        Variant::IntelVib,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::CpibCategorical => "cpib-categorical",
            Variant::CpibCompound => "cpib-compound",
            Variant::VibFixed => "vib-fixed",
            Variant::DropVib => "drop-vib",
            Variant::IntelVib => "intel-vib",
        }
    }

    /// Variants with a learned per-datum dimension distribution.
    pub fn is_spike_slab(self) -> bool {
        matches!(self, Variant::CpibCategorical | Variant::CpibCompound)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Variant::ALL.iter().map(|v| v.as_str()).collect();
                format!("unknown variant `{s}` (expected one of {})", names.join(", "))
            })
    }
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Latent cap `K`.
    #[serde(default = "ModelSpec::default_k")]
    pub k: usize,
    pub beta: f64,
    /// Monte Carlo draws of the latent per datum in the loss.
    #[serde(default = "ModelSpec::default_mc")]
    pub mc_samples: usize,
    /// Dimension prior of the spike-slab variants.
    #[serde(default = "ModelSpec::default_prior")]
    pub prior: DimensionPrior,
    /// Latent width of `vib-fixed`.
    #[serde(default)]
    pub fixed_dim: Option<usize>,
    #[serde(default = "default_true")]
    pub square_compression: bool,
    #[serde(default = "ModelSpec::default_encoder_hidden")]
    pub encoder_hidden: Vec<usize>,
    #[serde(default = "ModelSpec::default_decoder_hidden")]
    pub decoder_hidden: Vec<usize>,
    #[serde(default = "ModelSpec::default_input_dim")]
    pub input_dim: usize,
    #[serde(default = "ModelSpec::default_classes")]
    pub num_classes: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::new(Variant::CpibCompound)
    }
}

impl ModelSpec {
    fn default_k() -> usize {
        100
    }
    fn default_mc() -> usize {
        1
    }
    fn default_prior() -> DimensionPrior {
        DimensionPrior::compound(2.0, 2.0)
    }
    fn default_encoder_hidden() -> Vec<usize> {
        vec![800, 800]
    }
    fn default_decoder_hidden() -> Vec<usize> {
        vec![800]
    }
    fn default_input_dim() -> usize {
        784
    }
    fn default_classes() -> usize {
        10
    }

    /// MNIST-sized spec for `variant` with `K = 100`, `beta = 0.08`.
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            k: Self::default_k(),
            beta: 0.08,
            mc_samples: Self::default_mc(),
            prior: Self::default_prior(),
            fixed_dim: (variant == Variant::VibFixed).then_some(32),
            square_compression: true,
            encoder_hidden: Self::default_encoder_hidden(),
            decoder_hidden: Self::default_decoder_hidden(),
            input_dim: Self::default_input_dim(),
            num_classes: Self::default_classes(),
        }
    }

    /// Width of the code fed to the decoder.
    pub fn latent_width(&self) -> usize {
        match self.variant {
            Variant::VibFixed => self.fixed_dim.unwrap_or(self.k),
            _ => self.k,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidSpec(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be finite and nonnegative, got {}", self.beta));
        }
        if self.mc_samples == 0 {
            return bad("mc_samples must be at least 1".into());
        }
        if self.input_dim == 0 || self.num_classes < 2 {
            return bad("input_dim must be positive and num_classes at least 2".into());
        }
        if self.encoder_hidden.contains(&0) || self.decoder_hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        match self.variant {
            Variant::VibFixed => match self.fixed_dim {
                Some(0) | None => return bad("vib-fixed needs fixed_dim >= 1".into()),
                Some(_) => {}
            },
            _ if self.fixed_dim.is_some() => {
                return bad(format!("fixed_dim only applies to vib-fixed, not {}", self.variant))
            }
            _ => {}
        }
        if self.variant.is_spike_slab() {
            let probs = self.prior.probs(self.k)?;
            if let Some(i) = probs.iter().position(|&p| p <= 0.0) {
                return bad(format!(
                    "prior puts zero mass on dimension {}; the posterior always has support there",
                    i + 1
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{v}\""));
        }
        assert!("vib".parse::<Variant>().is_err());
    }

    #[test]
    fn validation() {
        assert!(ModelSpec::new(Variant::CpibCompound).validate().is_ok());
        assert!(ModelSpec::new(Variant::VibFixed).validate().is_ok());
        let mut s = ModelSpec::new(Variant::VibFixed);
        s.fixed_dim = None;
        assert!(s.validate().is_err());
        let mut s = ModelSpec::new(Variant::CpibCategorical);
        s.k = 3;
        s.prior = DimensionPrior::Explicit {
            probs: vec![0.5, 0.5, 0.0],
        };
        assert!(s.validate().is_err());
        let mut s = ModelSpec::new(Variant::DropVib);
        s.beta = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn toml_defaults() {
        let s: ModelSpec = toml::from_str("variant = \"vib-fixed\"\nbeta = 0.1\nfixed_dim = 6").unwrap();
        assert_eq!(s.k, 100);
        assert_eq!(s.latent_width(), 6);
        assert!(s.square_compression);
        assert!(toml::from_str::<ModelSpec>("variant = \"drop-vib\"\nbeta = 0.1\nwidth = 3").is_err());
    }
}
