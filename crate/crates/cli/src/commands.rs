use std::fs;
use std::path::{Path, PathBuf};

use cpib_core::data::{load_split, Dataset, Split};
use cpib_core::model::Model;
use cpib_core::ood::{
    evaluate, parse_records, records_to_csv, EvalOptions, SHOT_NOISE_LAMBDAS,
};
use cpib_core::train::{fit, info_curve, select_beta_mni, History};

use crate::config::{EvalConfig, ExperimentConfig, Overrides};
use crate::error::{CliError, Code};
use crate::plot;

/// Exclusive claim on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub const FILE: &'static str = ".cpib.lock";

    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(Self::FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::new(
                Code::Lock,
                format!("{} is in use by another run (remove {} if stale)", dir.display(), path.display()),
            )),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn load_config(path: Option<&Path>, o: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(o)?;
    Ok(cfg)
}

fn train_set(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    let d = load_split(cfg.data.root(), &cfg.data.name, Split::Train)?;
    Ok(match cfg.data.train_subset {
        Some(n) => d.subset(n, cfg.train.seed)?,
        None => d,
    })
}

fn test_set(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    Ok(load_split(cfg.data.root(), &cfg.data.name, Split::Test)?)
}

fn progress(label: &str, epochs: usize) -> impl FnMut(&cpib_core::train::EpochRecord) + '_ {
    move |e| {
        eprintln!(
            "{label}epoch {}/{epochs}: loss {:.4} (i {:.4}, ii {:.4}, iii {:.4}) train error {:.4}",
            e.epoch, e.loss, e.term_i, e.term_ii, e.term_iii, e.train_error
        )
    }
}

pub fn train(config: Option<&Path>, o: &Overrides) -> Result<(), CliError> {
    let cfg = load_config(config, o)?;
    let out = cfg.output_dir()?.to_path_buf();
    let data = train_set(&cfg)?;
    let _lock = DirLock::acquire(&out)?;
    write(&out.join("resolved_config.toml"), &cfg.to_toml()?)?;
    let mut model = Model::<f32>::new(cfg.model.clone(), cfg.train.seed)?;
    let history = fit(&mut model, &cfg.train, &data, progress("", cfg.train.epochs))?;
    save_run(&out, &model, &history)?;
    println!("{}", out.join("model.ckpt").display());
    Ok(())
}

fn save_run(dir: &Path, model: &Model<f32>, history: &History) -> Result<(), CliError> {
    model.save(dir.join("model.ckpt"))?;
    write(&dir.join("history.csv"), &history.to_csv())
}

/// Scenario selection for `eval`; command-line flags replace the config list.
#[derive(Clone, Debug, Default)]
pub struct ScenarioFlags {
    pub clean: bool,
    pub noise: Option<Vec<usize>>,
    pub rotate: Option<Vec<f64>>,
    pub pgd: bool,
    pub eps: Option<Vec<f64>>,
    pub iters: Option<Vec<usize>>,
    pub mc_passes: Option<usize>,
}

impl ScenarioFlags {
    fn any(&self) -> bool {
        self.clean || self.noise.is_some() || self.rotate.is_some() || self.pgd
    }

    fn resolve(&self, base: &EvalConfig) -> Result<EvalConfig, CliError> {
        let mut e = base.clone();
        if let Some(m) = self.mc_passes {
            e.mc_passes = m;
        }
        if !self.any() {
            if e.scenarios().is_empty() {
                e.clean = true;
            }
            return Ok(e);
        }
        if !self.pgd && (self.eps.is_some() || self.iters.is_some()) {
            return Err(CliError::new(Code::Config, "--eps/--iters need --pgd"));
        }
        e.clean = self.clean;
        e.noise_levels = self.noise.clone().unwrap_or_default();
        e.rotations = self.rotate.clone().unwrap_or_default();
        e.pgd_eps = Vec::new();
        if self.pgd {
            e.pgd_eps = self
                .eps
                .clone()
                .ok_or_else(|| CliError::new(Code::Config, "--pgd needs --eps"))?;
            if let Some(it) = &self.iters {
                e.pgd_iters = it.clone();
            }
        }
        Ok(e)
    }
}

fn eval_meta(e: &EvalConfig, checkpoint: &Path) -> Vec<(String, String)> {
    let lambdas: Vec<String> = SHOT_NOISE_LAMBDAS.iter().map(|l| l.to_string()).collect();
    let name = checkpoint
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    vec![
        ("checkpoint".into(), name),
        ("mc_passes".into(), e.mc_passes.to_string()),
        ("shot_noise_lambdas".into(), lambdas.join(" ")),
        ("rotation".into(), "bilinear about the image center, zero fill".into()),
        (
            "pgd".into(),
            "L-inf, gradients through latent means and the posterior-mode mask; step eps for 1 iteration, eps/4 otherwise".into(),
        ),
    ]
}

pub fn eval(
    checkpoint: &Path,
    config: Option<&Path>,
    o: &Overrides,
    flags: &ScenarioFlags,
) -> Result<(), CliError> {
    let cfg = load_config(config, o)?;
    let out = cfg.output_dir()?.to_path_buf();
    let model = Model::<f32>::load(checkpoint)?;
    let e = flags.resolve(&cfg.eval)?;
    let scenarios = e.scenarios();
    for s in &scenarios {
        s.validate()?;
    }
    let data = test_set(&cfg)?;
    let _lock = DirLock::acquire(&out)?;
    let opts = EvalOptions {
        mc_passes: e.mc_passes,
        batch_size: e.batch_size,
        seed: cfg.train.seed,
    };
    let mut rows = Vec::with_capacity(scenarios.len());
    for s in &scenarios {
        let r = evaluate(&model, &data, s, &opts)?;
        eprintln!("{s}: error {:.4}, loglik {:.4}, brier {:.4}", r.error, r.loglik, r.brier);
        rows.push(r);
    }
    let path = out.join("results.csv");
    write(&path, &records_to_csv(&rows, &eval_meta(&e, checkpoint)))?;
    println!("{}", path.display());
    Ok(())
}

pub fn sweep(config: Option<&Path>, o: &Overrides, betas: Option<Vec<f64>>) -> Result<(), CliError> {
    let mut cfg = load_config(config, o)?;
    if let Some(b) = betas {
        cfg.train.beta_grid = b;
        cfg.train.validate()?;
    }
    if cfg.train.beta_grid.is_empty() {
        return Err(CliError::new(Code::Config, "sweep needs a beta grid (train.beta_grid or --betas)"));
    }
    let out = cfg.output_dir()?.to_path_buf();
    let (train, test) = (train_set(&cfg)?, test_set(&cfg)?);
    let _lock = DirLock::acquire(&out)?;
    write(&out.join("resolved_config.toml"), &cfg.to_toml()?)?;
    let opts = EvalOptions {
        mc_passes: cfg.eval.mc_passes,
        batch_size: cfg.eval.batch_size,
        seed: cfg.train.seed,
    };
    let mut saved: Result<(), CliError> = Ok(());
    let curve = info_curve::<f32>(&cfg.model, &cfg.train, &train, &test, &opts, |beta, model, history| {
        let dir = out.join(format!("beta-{beta}"));
        let r = fs::create_dir_all(&dir)
            .map_err(|e| CliError::io(&dir, e))
            .and_then(|_| save_run(&dir, model, history));
        if saved.is_ok() {
            saved = r;
        }
    })?;
    saved?;
    let mut text = String::new();
    if let Some(b) = select_beta_mni(&curve.points) {
        text.push_str(&format!("# selected_beta_mni: {b}\n"));
    }
    for (b, e) in &curve.failures {
        text.push_str(&format!("# failed beta {b}: {}\n", e.to_string().replace('\n', " ")));
    }
    text.push_str(&curve.to_csv());
    let path = out.join("curve.csv");
    write(&path, &text)?;
    if curve.points.is_empty() {
        let (b, e) = &curve.failures[0];
        return Err(CliError::new(Code::Train, format!("every grid point failed; beta {b}: {e}")));
    }
    println!("{}", path.display());
    Ok(())
}

pub fn plot(inputs: &[PathBuf], metric: &str, out: &Path) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for p in inputs {
        let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        let r = parse_records(&text).map_err(|e| CliError::new(Code::Plot, format!("{}: {e}", p.display())))?;
        rows.extend(r);
    }
    let charts = plot::charts(&rows, metric)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for (name, svg) in charts {
        let path = out.join(name);
        write(&path, &svg)?;
        println!("{}", path.display());
    }
    Ok(())
}
