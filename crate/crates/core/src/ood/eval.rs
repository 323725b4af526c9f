use std::f64::consts::LN_2;

use crate::autograd::Tensor;
use crate::data::Dataset;
use crate::model::{Model, Noise};
use crate::rng;
use crate::scalar::Scalar;

use super::records::EvalRecord;
use super::transforms::{rotate, shot_noise};
use super::{OodError, Scenario};

/// How an evaluation is run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    /// Latent draws averaged into the predictive distribution.
    pub mc_passes: usize,
    pub batch_size: usize,
    /// Seeds the shot noise and the latent draws; the latent noise depends
    /// only on `(seed, batch index, pass)`, so it is shared across scenarios.
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            mc_passes: 12,
            batch_size: 500,
            seed: 0,
        }
    }
}

/// Classification metrics of a predictive distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub error: f64,
    /// Mean `ln p(y | x)`, nats.
    pub loglik: f64,
    pub brier: f64,
}

/// Metrics of row-major class probabilities `probs` (`labels.len()` rows).
pub fn metrics(probs: &[f64], labels: &[usize]) -> Metrics {
    let n = labels.len();
    let c = probs.len() / n.max(1);
    let mut acc = Acc::default();
    for (row, &y) in probs.chunks(c).zip(labels) {
        acc.push(row, y, row[y].ln());
    }
    acc.finish(n)
}

#[derive(Default)]
struct Acc {
    wrong: usize,
    loglik: f64,
    brier: f64,
}

impl Acc {
    fn push(&mut self, p: &[f64], y: usize, log_py: f64) {
        let mut best = 0;
        for (i, v) in p.iter().enumerate() {
            if *v > p[best] {
                best = i;
            }
        }
        if best != y {
            self.wrong += 1;
        }
        self.loglik += log_py;
        self.brier += p
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let d = v - if i == y { 1.0 } else { 0.0 };
                d * d
            })
            .sum::<f64>();
    }

    fn finish(&self, n: usize) -> Metrics {
        let n = n as f64;
        Metrics {
            error: self.wrong as f64 / n,
            loglik: self.loglik / n,
            brier: self.brier / n,
        }
    }
}

/// L-infinity PGD from `x` against labels `y`, with input gradients taken in
/// the deterministic latent mode.
pub fn pgd_attack<T: Scalar>(
    model: &Model<T>,
    x: &Tensor<T>,
    y: &[usize],
    epsilon: f64,
    iterations: usize,
    step: f64,
) -> Result<Tensor<T>, OodError> {
    let mut adv = x.clone();
    if epsilon == 0.0 || step == 0.0 {
        return Ok(adv);
    }
    let (eps, step) = (T::of(epsilon), T::of(step));
    let (zero, one) = (T::zero(), T::one());
    for _ in 0..iterations {
        let g = model.input_gradient(&adv, y)?;
        for ((a, &x0), &gi) in adv.data_mut().iter_mut().zip(x.data()).zip(g.data()) {
            let s = if gi > zero {
                step
            } else if gi < zero {
                zero - step
            } else {
                zero
            };
            let lo = (x0 - eps).max(zero);
            let hi = (x0 + eps).min(one);
            *a = (*a + s).max(lo).min(hi);
        }
    }
    Ok(adv)
}

/// Evaluates `model` on `data` transformed by `scenario`.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    data: &Dataset,
    scenario: &Scenario,
    opts: &EvalOptions,
) -> Result<EvalRecord, OodError> {
    scenario.validate()?;
    if data.is_empty() {
        return Err(OodError::EmptyDataset);
    }
    if opts.mc_passes == 0 || opts.batch_size == 0 {
        return Err(OodError::InvalidScenario("mc_passes and batch_size must be positive".into()));
    }
    let spec = model.spec();
    let (rows, cols, dim) = (data.rows(), data.cols(), data.dim());
    let n = data.len();
    let passes = opts.mc_passes;
    let mut acc = Acc::default();
    let (mut ce, mut comp) = (0.0f64, 0.0f64);
    let all: Vec<usize> = (0..n).collect();
    for (bi, idx) in all.chunks(opts.batch_size).enumerate() {
        let mut pixels = Vec::with_capacity(idx.len() * dim);
        for &i in idx {
            let img = data.image(i);
            match *scenario {
                Scenario::ShotNoise { level } => {
                    let mut r = rng::substream(opts.seed, "shot-noise", i as u64);
                    pixels.extend(shot_noise(img, level, &mut r)?);
                }
                Scenario::Rotation { degrees } => pixels.extend(rotate(img, rows, cols, degrees)),
                _ => pixels.extend_from_slice(img),
            }
        }
        let y: Vec<usize> = idx.iter().map(|&i| data.label(i)).collect();
        let mut x = Tensor::matrix(idx.len(), dim, pixels.into_iter().map(|v| T::of(v as f64)).collect());
        if let Scenario::Pgd {
            epsilon, iterations, ..
        } = *scenario
        {
            let step = scenario.step_size().expect("pgd has a step");
            x = pgd_attack(model, &x, &y, epsilon, iterations, step)?;
        }

        let mut r = rng::substream(opts.seed, "eval-noise", bi as u64);
        let noise: Vec<Noise<T>> = (0..passes).map(|_| Noise::draw(spec, idx.len(), &mut r)).collect();
        let (draws, c) = model.sample_log_probs(&x, &noise)?;
        comp += c.iter().sum::<f64>();
        let classes = spec.num_classes;
        let mut log_mix = vec![0.0f64; classes];
        for (row, &yi) in y.iter().enumerate() {
            let span = row * classes..(row + 1) * classes;
            for (k, lm) in log_mix.iter_mut().enumerate() {
                let m = draws
                    .iter()
                    .map(|d| d[span.start + k])
                    .fold(f64::NEG_INFINITY, f64::max);
                *lm = if m == f64::NEG_INFINITY {
                    m
                } else {
                    m + draws.iter().map(|d| (d[span.start + k] - m).exp()).sum::<f64>().ln()
                        - (passes as f64).ln()
                };
            }
            ce -= draws.iter().map(|d| d[span.start + yi]).sum::<f64>() / passes as f64;
            let p: Vec<f64> = log_mix.iter().map(|l| l.exp()).collect();
            acc.push(&p, yi, log_mix[yi]);
        }
    }
    let m = acc.finish(n);
    let nf = n as f64;
    Ok(EvalRecord {
        scenario: scenario.label(),
        severity: scenario.severity(),
        variant: spec.variant.to_string(),
        beta: spec.beta,
        seed: opts.seed,
        error: m.error,
        loglik: m.loglik,
        brier: m.brier,
        mi_xz: comp / nf / LN_2,
        mi_zy: (spec.num_classes as f64).log2() - ce / nf / LN_2,
    })
}
