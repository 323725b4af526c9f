use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cpib_core::distributions::DimensionPrior;
use cpib_core::model::{ModelSpec, Variant};
use cpib_core::ood::Scenario;
use cpib_core::train::TrainConfig;

use crate::error::{CliError, Code};

/// Environment variable giving the default dataset root.
pub const DATA_ROOT_ENV: &str = "CPIB_DATA_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding `train-*` / `t10k-*` IDX files.
    #[serde(default)]
    pub root: Option<PathBuf>,
    #[serde(default = "DataConfig::default_name")]
    pub name: String,
    /// Seeded subset of the training split; all of it when absent.
    #[serde(default)]
    pub train_subset: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            root: None,
            name: Self::default_name(),
            train_subset: None,
        }
    }
}

impl DataConfig {
    fn default_name() -> String {
        "mnist".into()
    }

    pub fn resolve_root(&mut self) {
        if self.root.is_none() {
            let root = std::env::var_os(DATA_ROOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("data/mnist"));
            self.root = Some(root);
        }
    }

    pub fn root(&self) -> &Path {
        self.root.as_deref().unwrap_or(Path::new("data/mnist"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "EvalConfig::default_passes")]
    pub mc_passes: usize,
    #[serde(default = "EvalConfig::default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_true")]
    pub clean: bool,
    #[serde(default)]
    pub noise_levels: Vec<usize>,
    #[serde(default)]
    pub rotations: Vec<f64>,
    #[serde(default)]
    pub pgd_eps: Vec<f64>,
    #[serde(default = "EvalConfig::default_iters")]
    pub pgd_iters: Vec<usize>,
}

fn default_true() -> bool {
    true
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mc_passes: Self::default_passes(),
            batch_size: Self::default_batch(),
            clean: true,
            noise_levels: Vec::new(),
            rotations: Vec::new(),
            pgd_eps: Vec::new(),
            pgd_iters: Self::default_iters(),
        }
    }
}

impl EvalConfig {
    fn default_passes() -> usize {
        12
    }
    fn default_batch() -> usize {
        500
    }
    fn default_iters() -> Vec<usize> {
        vec![20]
    }

    /// Scenarios in output order: clean, shot noise, rotation, PGD.
    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        if self.clean {
            out.push(Scenario::Clean);
        }
        out.extend(self.noise_levels.iter().map(|&level| Scenario::ShotNoise { level }));
        out.extend(self.rotations.iter().map(|&degrees| Scenario::Rotation { degrees }));
        for &it in &self.pgd_iters {
            out.extend(self.pgd_eps.iter().map(|&e| Scenario::pgd(e, it)));
        }
        out
    }
}

/// One experiment: data, model, optimization and evaluation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub data: DataConfig,
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output: None,
            data: DataConfig::default(),
            model: ModelSpec::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub variant: Option<Variant>,
    pub beta: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub k: Option<usize>,
    pub epochs: Option<usize>,
    pub data_root: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new(Code::Config, format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| {
            let msg = e.to_string().replace('\n', " ");
            CliError::new(Code::Config, format!("{}: {}", path.display(), msg.trim()))
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(s) = o.seed {
            self.train.seed = s;
        }
        if let Some(out) = &o.out {
            self.output = Some(out.clone());
        }
        if let Some(v) = o.variant {
            self.model.variant = v;
            if v == Variant::VibFixed && self.model.fixed_dim.is_none() {
                self.model.fixed_dim = Some(32);
            }
        }
        if let Some(b) = o.beta {
            self.model.beta = b;
        }
        if o.a.is_some() || o.b.is_some() {
            let (a0, b0) = match self.model.prior {
                DimensionPrior::Compound { a, b } => (a, b),
                DimensionPrior::Explicit { .. } => (2.0, 2.0),
            };
            self.model.prior = DimensionPrior::compound(o.a.unwrap_or(a0), o.b.unwrap_or(b0));
        }
        if let Some(k) = o.k {
            self.model.k = k;
        }
        if let Some(e) = o.epochs {
            self.train.epochs = e;
        }
        if let Some(r) = &o.data_root {
            self.data.root = Some(r.clone());
        }
        self.data.resolve_root();
        self.model
            .validate()
            .map_err(|e| CliError::new(Code::Config, e.to_string()))?;
        self.train
            .validate()
            .map_err(|e| CliError::new(Code::Config, e.to_string()))?;
        for s in self.eval.scenarios() {
            s.validate().map_err(|e| CliError::new(Code::Config, e.to_string()))?;
        }
        Ok(())
    }

    pub fn output_dir(&self) -> Result<&Path, CliError> {
        self.output
            .as_deref()
            .ok_or_else(|| CliError::new(Code::Config, "no output directory (set `output` or pass --out)"))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::new(Code::Config, format!("cannot serialize config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_and_round_trip() {
        let mut c: ExperimentConfig = toml::from_str("[model]\nvariant = \"cpib-compound\"\nbeta = 0.08\n").unwrap();
        assert_eq!(c.model.k, 100);
        c.apply(&Overrides {
            a: Some(1.0),
            variant: Some(Variant::VibFixed),
            data_root: Some("x".into()),
            ..Overrides::default()
        })
        .unwrap();
        assert_eq!(c.model.fixed_dim, Some(32));
        assert_eq!(c.model.prior, DimensionPrior::compound(1.0, 2.0));
        let back: ExperimentConfig = toml::from_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("[model]\nvariant = \"vib-fixed\"\nbeta = 0.1\nbogus = 1\n").is_err());
        assert!(toml::from_str::<ExperimentConfig>("extra = 1\n[model]\nvariant = \"vib-fixed\"\nbeta = 0.1\n").is_err());
    }

    #[test]
    fn scenario_order() {
        let e = EvalConfig {
            noise_levels: vec![1, 2],
            rotations: vec![30.0],
            pgd_eps: vec![0.1],
            pgd_iters: vec![1, 20],
            ..EvalConfig::default()
        };
        let labels: Vec<_> = e.scenarios().iter().map(|s| s.label()).collect();
        assert_eq!(labels, ["clean", "shot-noise", "shot-noise", "rotation", "pgd-1", "pgd-20"]);
    }
}
