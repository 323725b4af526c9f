use std::fmt::Write as _;

use crate::autograd::{Tape, TensorError};
use crate::data::Dataset;
use crate::model::{Model, ModelError, ModelSpec, Noise};
use crate::rng;
use crate::scalar::Scalar;

use super::optim::{clip_global_norm, Optimizer};
use super::{TrainConfig, TrainError};

/// Batch-size weighted means over one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    pub tau: f64,
    pub train_error: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub const HEADER: &'static str = "epoch,loss,term_i,term_ii,term_iii,tau,train_error";

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.epoch, r.loss, r.term_i, r.term_ii, r.term_iii, r.tau, r.train_error
            );
        }
        out
    }
}

/// Fresh model for `spec` (initialized from `cfg.seed`) trained on `data`.
pub fn train<T: Scalar>(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    data: &Dataset,
) -> Result<(Model<T>, History), TrainError> {
    let mut model = Model::new(spec.clone(), cfg.seed)?;
    let history = fit(&mut model, cfg, data, |_| {})?;
    Ok((model, history))
}

fn divergence(epoch: usize, step: usize, e: ModelError) -> TrainError {
    match e {
        ModelError::Tensor(TensorError::NonFinite { op }) => TrainError::Divergence {
            epoch,
            step,
            term: format!("output of `{op}`"),
            value: f64::NAN,
        },
        other => other.into(),
    }
}

/// Trains `model` in place; `on_epoch` sees every finished epoch.
pub fn fit<T: Scalar>(
    model: &mut Model<T>,
    cfg: &TrainConfig,
    data: &Dataset,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<History, TrainError> {
    cfg.validate()?;
    let spec = model.spec().clone();
    if data.dim() != spec.input_dim {
        return Err(TrainError::DataShape {
            expected: spec.input_dim,
            found: data.dim(),
        });
    }
    if data.is_empty() {
        return Err(TrainError::InvalidConfig("training set is empty".into()));
    }
    let mut opt = Optimizer::new(cfg.optimizer.clone(), cfg.learning_rate, model.params().values());
    let mut history = History::default();
    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        let tau = cfg.tau.at(epoch);
        let order = data.epoch_order(cfg.seed, epoch as u64);
        let mut sums = [0.0f64; 4];
        let mut correct = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            step += 1;
            let (x, y) = data.batch::<T>(idx);
            let mut noise_rng = rng::substream(cfg.seed, "train-noise", step as u64);
            let noise: Vec<Noise<T>> = (0..spec.mc_samples)
                .map(|_| Noise::draw(&spec, idx.len(), &mut noise_rng))
                .collect();

            let tape = Tape::new();
            let bound = model.bind(&tape, true);
            let parts = model
                .loss(&bound, tape.constant(x), &y, &noise, tau)
                .map_err(|e| divergence(epoch, step, e))?;
            let total = parts.total.item().as_f64();
            for (name, v) in [
                ("term i (cross-entropy)", parts.term_i),
                ("term ii (slab KL)", parts.term_ii),
                ("term iii (dimension KL)", parts.term_iii),
                ("total loss", total),
            ] {
                if !v.is_finite() {
                    return Err(TrainError::Divergence {
                        epoch,
                        step,
                        term: name.into(),
                        value: v,
                    });
                }
            }
            tape.backward(parts.total).map_err(ModelError::from)?;
            let mut grads: Vec<_> = bound
                .vars
                .iter()
                .map(|v| tape.take_grad(*v).expect("parameters require grad"))
                .collect();
            if let Some(c) = cfg.grad_clip {
                let norm = clip_global_norm(&mut grads, c);
                if !norm.is_finite() {
                    return Err(TrainError::Divergence {
                        epoch,
                        step,
                        term: "gradient norm".into(),
                        value: norm,
                    });
                }
            }
            opt.step(model.params_mut().values_mut(), &grads);

            let w = idx.len() as f64;
            sums[0] += w * total;
            sums[1] += w * parts.term_i;
            sums[2] += w * parts.term_ii;
            sums[3] += w * parts.term_iii;
            correct += parts.correct;
        }
        let n = data.len() as f64;
        let rec = EpochRecord {
            epoch,
            loss: sums[0] / n,
            term_i: sums[1] / n,
            term_ii: sums[2] / n,
            term_iii: sums[3] / n,
            tau,
            train_error: 1.0 - correct as f64 / n,
        };
        on_epoch(&rec);
        history.epochs.push(rec);
    }
    Ok(history)
}
