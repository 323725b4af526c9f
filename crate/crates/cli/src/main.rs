//! `cpib`: train, evaluate, sweep and plot information-bottleneck classifiers.

mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cpib_core::model::Variant;

use crate::commands::ScenarioFlags;
use crate::config::Overrides;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "cpib", version, about = "Information-bottleneck classifiers with a spike-slab dimension prior")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    beta: Option<f64>,
    /// Compound prior shape `a`.
    #[arg(long)]
    a: Option<f64>,
    /// Compound prior shape `b`.
    #[arg(long)]
    b: Option<f64>,
    /// Latent cap K.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Dataset directory [default: $CPIB_DATA_ROOT, else data/mnist].
    #[arg(long)]
    data_root: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            variant: self.variant,
            beta: self.beta,
            a: self.a,
            b: self.b,
            k: self.k,
            epochs: self.epochs,
            data_root: self.data_root.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one model; writes model.ckpt, history.csv and resolved_config.toml.
    Train(Common),
    /// Evaluate a checkpoint under clean, shot-noise, rotation and PGD scenarios.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        clean: bool,
        /// Shot-noise levels, e.g. `1..8` or `1,3,5`.
        #[arg(long, value_parser = parse_levels)]
        noise: Option<Counts>,
        /// Rotation angles in degrees, e.g. `0,15,30,45`.
        #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
        rotate: Option<Floats>,
        #[arg(long)]
        pgd: bool,
        /// PGD radii, e.g. `0,0.1,0.2`.
        #[arg(long, value_parser = parse_floats)]
        eps: Option<Floats>,
        /// PGD iteration counts, e.g. `1,20`.
        #[arg(long, value_parser = parse_counts)]
        iters: Option<Counts>,
        #[arg(long)]
        mc_passes: Option<usize>,
    },
    /// Train one model per β and write the information curve.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// β grid, e.g. `0.01,0.03,0.08`.
        #[arg(long, value_parser = parse_floats)]
        betas: Option<Floats>,
    },
    /// Render results CSVs as SVG line charts.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "error")]
        metric: String,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Comma-separated numbers given as one argument.
#[derive(Clone, Debug, PartialEq)]
struct Floats(Vec<f64>);

#[derive(Clone, Debug, PartialEq)]
struct Counts(Vec<usize>);

fn parse_floats(s: &str) -> Result<Floats, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number")))
        .collect::<Result<_, _>>()
        .map(Floats)
}

fn parse_counts(s: &str) -> Result<Counts, String> {
    s.split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| format!("`{v}` is not a count")))
        .collect::<Result<_, _>>()
        .map(Counts)
}

fn parse_levels(s: &str) -> Result<Counts, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| format!("bad range start `{a}`"))?;
        let b: usize = b.trim_start_matches('=').trim().parse().map_err(|_| format!("bad range end `{b}`"))?;
        if a > b {
            return Err(format!("empty range {s}"));
        }
        return Ok(Counts((a..=b).collect()));
    }
    parse_counts(s)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(c) => commands::train(c.config.as_deref(), &c.overrides()),
        Command::Eval {
            checkpoint,
            common,
            clean,
            noise,
            rotate,
            pgd,
            eps,
            iters,
            mc_passes,
        } => {
            let flags = ScenarioFlags {
                clean,
                noise: noise.map(|c| c.0),
                rotate: rotate.map(|f| f.0),
                pgd,
                eps: eps.map(|f| f.0),
                iters: iters.map(|c| c.0),
                mc_passes,
            };
            commands::eval(&checkpoint, common.config.as_deref(), &common.overrides(), &flags)
        }
        Command::Sweep { common, betas } => commands::sweep(common.config.as_deref(), &common.overrides(), betas.map(|f| f.0)),
        Command::Plot { inputs, metric, out } => commands::plot(&inputs, &metric, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
