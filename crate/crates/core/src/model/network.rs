use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::autograd::{Tape, Tensor, Var};
use crate::distributions::{
    categorical_kl_var, compound_log_probs_var, gumbel_noise, gumbel_softmax_var,
    standard_normal_kl_var, DimensionPrior,
};
use crate::rng;
use crate::scalar::Scalar;

use super::latent::{argmax, DimHead, EncoderOutput};
use super::params::{Init, Mlp, Params};
use super::{ModelError, ModelSpec, Variant, SHAPE_FLOOR, SIGMA_FLOOR};

/// How the latent code is formed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    /// Relaxed (differentiable) masks at temperature `tau`.
    Train { tau: f64 },
    /// Hard masks sampled from the posterior; slab sampled.
    Sample,
    /// Slab mean and the posterior-mode mask; no randomness.
    Mean,
}

/// Pre-drawn noise for one latent draw of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Noise<T: Scalar = f32> {
    /// Standard normal, `[batch, width]` (empty for `drop-vib`).
    pub eps: Tensor<T>,
    /// Gumbel (spike-slab) or logistic (`drop-vib`) noise, `[batch, K]`;
    /// empty for the other variants.
    pub g: Tensor<T>,
}

impl<T: Scalar> Noise<T> {
    pub fn draw<R: Rng + ?Sized>(spec: &ModelSpec, batch: usize, rng: &mut R) -> Self {
        let w = spec.latent_width();
        let k = spec.k;
        let eps_n = if spec.variant == Variant::DropVib { 0 } else { batch * w };
        let eps: Vec<T> = (0..eps_n)
            .map(|_| T::of(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let g: Vec<T> = match spec.variant {
            Variant::CpibCategorical | Variant::CpibCompound => {
                gumbel_noise(rng, batch * k).into_iter().map(T::of).collect()
            }
            Variant::DropVib => (0..batch * k)
                .map(|_| {
                    let u: f64 = rng.sample(Open01);
                    T::of(u.ln() - (-u).ln_1p())
                })
                .collect(),
            _ => Vec::new(),
        };
        let eps_w = if eps_n == 0 { 0 } else { w };
        let g_w = if g.is_empty() { 0 } else { k };
        Self {
            eps: Tensor::matrix(batch, eps_w, eps),
            g: Tensor::matrix(batch, g_w, g),
        }
    }
}

/// Parameters of a model recorded on one tape.
pub struct Bound<'t, T: Scalar> {
    pub vars: Vec<Var<'t, T>>,
}

/// Encoder output on a tape, per variant family.
#[derive(Clone, Copy)]
pub enum Encoded<'t, T: Scalar> {
    SpikeSlab {
        mu: Var<'t, T>,
        sigma: Var<'t, T>,
        log_pi: Var<'t, T>,
    },
    Gaussian {
        mu: Var<'t, T>,
        sigma: Var<'t, T>,
    },
    Dropout {
        features: Var<'t, T>,
        keep_logits: Var<'t, T>,
    },
}

/// Differentiable total loss plus the batch means of its terms.
pub struct LossParts<'t, T: Scalar> {
    pub total: Var<'t, T>,
    /// Mean cross-entropy over data and latent draws.
    pub term_i: f64,
    /// Mean slab KL (spike-slab), full Gaussian KL (VIB variants) or
    /// retained-feature mass (`drop-vib`).
    pub term_ii: f64,
    /// Mean KL of the dimension posterior to its prior; zero for baselines.
    pub term_iii: f64,
    /// Correct argmax predictions under the first latent draw.
    pub correct: usize,
}

#[derive(Clone, Debug)]
pub struct Model<T: Scalar = f32> {
    spec: ModelSpec,
    params: Params<T>,
    encoder: Mlp,
    dim_encoder: Option<Mlp>,
    selector: Option<Mlp>,
    keep: Option<usize>,
    decoder: Mlp,
    log_prior: Vec<f64>,
}

fn softplus_inv(y: f64) -> f64 {
    if y > 20.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(input);
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

impl<T: Scalar> Model<T> {
    /// Freshly initialized model; initialization is a function of `seed`.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self, ModelError> {
        spec.validate()?;
        let mut r = rng::stream(seed, "init");
        let mut params = Params::default();
        let k = spec.k;
        let width = spec.latent_width();
        let enc_out = if spec.variant == Variant::DropVib { k } else { 2 * width };
        let encoder = Mlp::build(
            &mut params,
            "encoder",
            &widths(spec.input_dim, &spec.encoder_hidden, enc_out),
            Init::Lecun,
            &mut r,
        );

        let mut log_prior = Vec::new();
        let dim_encoder = if spec.variant.is_spike_slab() {
            let out = if spec.variant == Variant::CpibCompound { 2 } else { k };
            let mlp = Mlp::build(
                &mut params,
                "dim_encoder",
                &widths(spec.input_dim, &spec.encoder_hidden, out),
                Init::Lecun,
                &mut r,
            );
            let prior = spec.prior.probs(k)?;
            log_prior = prior.iter().map(|p| p.ln()).collect();
            let bias: Vec<T> = match (spec.variant, &spec.prior) {
                (Variant::CpibCompound, DimensionPrior::Compound { a, b }) => vec![
                    T::of(softplus_inv((a - SHAPE_FLOOR).max(1e-3))),
                    T::of(softplus_inv((b - SHAPE_FLOOR).max(1e-3))),
                ],
                (Variant::CpibCompound, _) => vec![T::of(softplus_inv(1.0)); 2],
                _ => log_prior.iter().map(|&l| T::of(l)).collect(),
            };
            params.values_mut()[mlp.output_bias()]
                .data_mut()
                .copy_from_slice(&bias);
            Some(mlp)
        } else {
            None
        };

        let selector = if spec.variant == Variant::IntelVib {
            let mlp = Mlp::build(&mut params, "selector", &[k, 10, 10, k], Init::Lecun, &mut r);
            params.values_mut()[mlp.output_bias()]
                .data_mut()
                .fill(T::one());
            Some(mlp)
        } else {
            None
        };

        let keep = (spec.variant == Variant::DropVib)
            .then(|| params.push("keep_logits".into(), Tensor::zeros(vec![k])));

        let decoder = Mlp::build(
            &mut params,
            "decoder",
            &widths(width, &spec.decoder_hidden, spec.num_classes),
            Init::Lecun,
            &mut r,
        );

        Ok(Self {
            spec,
            params,
            encoder,
            dim_encoder,
            selector,
            keep,
            decoder,
            log_prior,
        })
    }

    /// Rebuilds a model around existing parameter values; names and shapes
    /// must match the layout implied by `spec`.
    pub fn from_params(spec: ModelSpec, params: Params<T>) -> Result<Self, ModelError> {
        let mut model = Self::new(spec, 0)?;
        if model.params.info() != params.info() {
            return Err(ModelError::Checkpoint(
                "parameter names or shapes do not match the model spec".into(),
            ));
        }
        model.params = params;
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params<T> {
        &mut self.params
    }

    /// `log` of the dimension prior (spike-slab variants; empty otherwise).
    pub fn log_prior(&self) -> &[f64] {
        &self.log_prior
    }

    /// Zeroes the final layer of the decoder (uniform predictions).
    pub fn zero_decoder_output(&mut self) {
        let (w, b) = (self.decoder.output_weight(), self.decoder.output_bias());
        self.params.values_mut()[w].data_mut().fill(T::zero());
        self.params.values_mut()[b].data_mut().fill(T::zero());
    }

    /// Sets the weights of the encoder output layer to zero, so `mu = b_mu`
    /// and `sigma = softplus(b_sigma) + floor` for every input.
    pub fn zero_encoder_output(&mut self) {
        let (w, b) = (self.encoder.output_weight(), self.encoder.output_bias());
        self.params.values_mut()[w].data_mut().fill(T::zero());
        self.params.values_mut()[b].data_mut().fill(T::zero());
    }

    pub fn bind<'t>(&self, tape: &'t Tape<T>, trainable: bool) -> Bound<'t, T> {
        Bound {
            vars: self.params.bind(tape, trainable),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<usize, ModelError> {
        if x.ndim() != 2 || x.last_dim() != self.spec.input_dim {
            return Err(ModelError::InputWidth {
                expected: self.spec.input_dim,
                found: x.last_dim(),
            });
        }
        Ok(x.shape()[0])
    }

    fn check_labels(&self, y: &[usize], batch: usize) -> Result<(), ModelError> {
        if y.len() != batch {
            return Err(ModelError::LabelCount {
                len: y.len(),
                batch,
            });
        }
        if let Some(&label) = y.iter().find(|&&c| c >= self.spec.num_classes) {
            return Err(ModelError::LabelRange {
                label,
                classes: self.spec.num_classes,
            });
        }
        Ok(())
    }

    pub fn encode<'t>(&self, b: &Bound<'t, T>, x: Var<'t, T>) -> Result<Encoded<'t, T>, ModelError> {
        let width = x.value().last_dim();
        if width != self.spec.input_dim {
            return Err(ModelError::InputWidth {
                expected: self.spec.input_dim,
                found: width,
            });
        }
        let h = self.encoder.forward(&b.vars, x, false)?;
        if let Some(keep) = self.keep {
            return Ok(Encoded::Dropout {
                features: h,
                keep_logits: b.vars[keep],
            });
        }
        let w = self.spec.latent_width();
        let mu = h.slice_last(0, w)?;
        let sigma = h.slice_last(w, w)?.softplus()?.offset(SIGMA_FLOOR)?;
        match &self.dim_encoder {
            Some(dim) => {
                let head = dim.forward(&b.vars, x, false)?;
                let log_pi = if self.spec.variant == Variant::CpibCompound {
                    let ab = head.softplus()?.offset(SHAPE_FLOOR)?;
                    compound_log_probs_var(ab, self.spec.k)?
                } else {
                    head.log_softmax()?
                };
                Ok(Encoded::SpikeSlab { mu, sigma, log_pi })
            }
            None => Ok(Encoded::Gaussian { mu, sigma }),
        }
    }

    /// Latent code fed to the decoder, and the mask when the variant has one.
    pub fn latent<'t>(
        &self,
        b: &Bound<'t, T>,
        enc: &Encoded<'t, T>,
        mode: Mode,
        noise: Option<&Noise<T>>,
    ) -> Result<(Var<'t, T>, Option<Var<'t, T>>), ModelError> {
        let need_noise = || {
            noise.ok_or_else(|| ModelError::InvalidSpec("sampling mode needs a noise draw".into()))
        };
        match *enc {
            Encoded::SpikeSlab { mu, sigma, log_pi } => {
                let tape = mu.tape();
                let a = match mode {
                    Mode::Mean => mu,
                    _ => slab(mu, sigma, &need_noise()?.eps)?,
                };
                let gamma = match mode {
                    Mode::Train { tau } => {
                        let g = tape.constant(need_noise()?.g.clone());
                        gumbel_softmax_var(log_pi, g, tau)?.suffix_sum()?
                    }
                    Mode::Sample => {
                        let g = &need_noise()?.g;
                        let score: Vec<f64> = log_pi
                            .value()
                            .data()
                            .iter()
                            .zip(g.data())
                            .map(|(l, n)| l.as_f64() + n.as_f64())
                            .collect();
                        tape.constant(hard_mask(&score, self.spec.k))
                    }
                    Mode::Mean => {
                        let lp = log_pi.value().to_f64();
                        tape.constant(hard_mask(&lp, self.spec.k))
                    }
                };
                Ok((a.mul(gamma)?, Some(gamma)))
            }
            Encoded::Gaussian { mu, sigma } => {
                let a = match mode {
                    Mode::Mean => mu,
                    _ => slab(mu, sigma, &need_noise()?.eps)?,
                };
                match &self.selector {
                    Some(sel) => {
                        let s = sel.forward(&b.vars, a, true)?;
                        Ok((a.mul(s)?, Some(s)))
                    }
                    None => Ok((a, None)),
                }
            }
            Encoded::Dropout {
                features,
                keep_logits,
            } => {
                let tape = features.tape();
                let mask = match mode {
                    Mode::Train { tau } => {
                        let l = tape.constant(need_noise()?.g.clone());
                        l.add(keep_logits)?.scale(1.0 / tau)?.sigmoid()?
                    }
                    Mode::Sample => {
                        let kl = keep_logits.value().to_f64();
                        let l = &need_noise()?.g;
                        let data = l
                            .data()
                            .iter()
                            .enumerate()
                            .map(|(i, &n)| {
                                if n.as_f64() + kl[i % kl.len()] > 0.0 {
                                    T::one()
                                } else {
                                    T::zero()
                                }
                            })
                            .collect();
                        tape.constant(Tensor::new(l.shape().to_vec(), data)?)
                    }
                    Mode::Mean => {
                        let kl = keep_logits.value().to_f64();
                        let data = kl
                            .iter()
                            .map(|&v| if v >= 0.0 { T::one() } else { T::zero() })
                            .collect();
                        tape.constant(Tensor::vector(data))
                    }
                };
                Ok((features.mul(mask)?, Some(mask)))
            }
        }
    }

    /// Class logits for a code `z`.
    pub fn decode<'t>(&self, b: &Bound<'t, T>, z: Var<'t, T>) -> Result<Var<'t, T>, ModelError> {
        Ok(self.decoder.forward(&b.vars, z, false)?)
    }

    /// Per-datum compression terms `(ii, iii)`. For `drop-vib` term ii is
    /// the scalar retained mass and term iii is absent.
    pub fn compression<'t>(
        &self,
        enc: &Encoded<'t, T>,
    ) -> Result<(Var<'t, T>, Option<Var<'t, T>>), ModelError> {
        match *enc {
            Encoded::SpikeSlab { mu, sigma, log_pi } => {
                let kl = standard_normal_kl_var(mu, sigma)?;
                let tail = log_pi.exp()?.suffix_sum()?;
                let ii = kl.mul(tail)?.sum_last()?;
                let prior = Tensor::vector(self.log_prior.iter().map(|&v| T::of(v)).collect());
                let iii = categorical_kl_var(log_pi, mu.tape().constant(prior))?;
                Ok((ii, Some(iii)))
            }
            Encoded::Gaussian { mu, sigma } => {
                Ok((standard_normal_kl_var(mu, sigma)?.sum_last()?, None))
            }
            Encoded::Dropout { keep_logits, .. } => Ok((keep_logits.sigmoid()?.sum()?, None)),
        }
    }

    /// `term_i + beta * C` (or `beta * C^2`) with `C` the batch mean of the
    /// compression terms and `term_i` the cross-entropy averaged over the
    /// batch and the `noise` draws.
    pub fn loss<'t>(
        &self,
        b: &Bound<'t, T>,
        x: Var<'t, T>,
        y: &[usize],
        noise: &[Noise<T>],
        tau: f64,
    ) -> Result<LossParts<'t, T>, ModelError> {
        let batch = x.value().shape()[0];
        self.check_labels(y, batch)?;
        if noise.is_empty() {
            return Err(ModelError::InvalidSpec("loss needs at least one noise draw".into()));
        }
        let enc = self.encode(b, x)?;
        let mut ce: Option<Var<'t, T>> = None;
        let mut correct = None;
        for n in noise {
            let (z, _) = self.latent(b, &enc, Mode::Train { tau }, Some(n))?;
            let logits = self.decode(b, z)?;
            if correct.is_none() {
                let v = logits.value();
                let c = self.spec.num_classes;
                let hits = y
                    .iter()
                    .zip(v.data().chunks(c))
                    .filter(|(&label, row)| row_argmax(row) == label)
                    .count();
                correct = Some(hits);
            }
            let nll = logits.log_softmax()?.gather(y)?.mean()?.neg()?;
            ce = Some(match ce {
                Some(acc) => acc.add(nll)?,
                None => nll,
            });
        }
        let term_i = ce.expect("nonempty noise").scale(1.0 / noise.len() as f64)?;

        let (ii, iii) = self.compression(&enc)?;
        let mean_of = |v: Var<'t, T>| {
            let t = v.value();
            t.data().iter().map(|x| x.as_f64()).sum::<f64>() / t.len() as f64
        };
        let term_ii = mean_of(ii);
        let term_iii = iii.map(mean_of).unwrap_or(0.0);
        let per_datum = match iii {
            Some(iii) => ii.add(iii)?,
            None => ii,
        };
        let c = per_datum.mean()?;
        let penalty = if self.spec.square_compression { c.square()? } else { c };
        let total = term_i.add(penalty.scale(self.spec.beta)?)?;
        Ok(LossParts {
            total,
            term_i: term_i.item().as_f64(),
            term_ii,
            term_iii,
            correct: correct.unwrap_or(0),
        })
    }

    /// Class probabilities `[batch, classes]` without recording gradients.
    pub fn predict(
        &self,
        x: &Tensor<T>,
        mode: Mode,
        noise: Option<&Noise<T>>,
    ) -> Result<Tensor<T>, ModelError> {
        self.check_input(x)?;
        let tape = Tape::new();
        let b = self.bind(&tape, false);
        let enc = self.encode(&b, tape.constant(x.clone()))?;
        let (z, _) = self.latent(&b, &enc, mode, noise)?;
        let p = self.decode(&b, z)?.softmax()?;
        let out = p.value().clone();
        Ok(out)
    }

    /// Class log-probabilities of `x` under one [`Mode::Sample`] draw per
    /// entry of `noise` (`[batch * classes]` row-major, f64), plus the
    /// per-datum compression of [`Model::compression_per_datum`]. The encoder
    /// runs once.
    pub fn sample_log_probs(
        &self,
        x: &Tensor<T>,
        noise: &[Noise<T>],
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>), ModelError> {
        let batch = self.check_input(x)?;
        let tape = Tape::new();
        let b = self.bind(&tape, false);
        let enc = self.encode(&b, tape.constant(x.clone()))?;
        let draws = noise
            .iter()
            .map(|n| {
                let (z, _) = self.latent(&b, &enc, Mode::Sample, Some(n))?;
                let lp = self.decode(&b, z)?.log_softmax()?;
                let out = lp.value().to_f64();
                Ok(out)
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let comp = self.per_datum(&enc, batch)?;
        Ok((draws, comp))
    }

    /// Mean compression `(ii + iii)` per datum of `x` in deterministic
    /// encoder terms (no latent sampling is involved).
    pub fn compression_per_datum(&self, x: &Tensor<T>) -> Result<Vec<f64>, ModelError> {
        let batch = self.check_input(x)?;
        let tape = Tape::new();
        let b = self.bind(&tape, false);
        let enc = self.encode(&b, tape.constant(x.clone()))?;
        self.per_datum(&enc, batch)
    }

    fn per_datum(&self, enc: &Encoded<'_, T>, batch: usize) -> Result<Vec<f64>, ModelError> {
        let (ii, iii) = self.compression(enc)?;
        let ii = ii.value().to_f64();
        let iii = iii.map(|v| v.value().to_f64());
        Ok((0..batch)
            .map(|n| {
                let a = if ii.len() == 1 { ii[0] } else { ii[n] };
                a + iii.as_ref().map(|v| v[n]).unwrap_or(0.0)
            })
            .collect())
    }

    /// Gradient of the summed cross-entropy with respect to the input, with
    /// the latent in [`Mode::Mean`].
    pub fn input_gradient(&self, x: &Tensor<T>, y: &[usize]) -> Result<Tensor<T>, ModelError> {
        let batch = self.check_input(x)?;
        self.check_labels(y, batch)?;
        let tape = Tape::new();
        let b = self.bind(&tape, false);
        let xv = tape.param(x.clone());
        let enc = self.encode(&b, xv)?;
        let (z, _) = self.latent(&b, &enc, Mode::Mean, None)?;
        let loss = self.decode(&b, z)?.log_softmax()?.gather(y)?.sum()?.neg()?;
        tape.backward(loss)?;
        Ok(tape.take_grad(xv).expect("input requires grad"))
    }

    /// Per-datum encoder outputs of a spike-slab model.
    pub fn encoder_outputs(&self, x: &Tensor<T>) -> Result<Vec<EncoderOutput>, ModelError> {
        if !self.spec.variant.is_spike_slab() {
            return Err(ModelError::VariantMismatch {
                expected: "spike-slab",
                found: self.spec.variant,
            });
        }
        let batch = self.check_input(x)?;
        let tape = Tape::new();
        let b = self.bind(&tape, false);
        let xv = tape.constant(x.clone());
        let h = self.encoder.forward(&b.vars, xv, false)?.value().to_f64();
        let head = self
            .dim_encoder
            .as_ref()
            .expect("spike-slab has a dimension encoder")
            .forward(&b.vars, xv, false)?
            .value()
            .to_f64();
        let k = self.spec.k;
        let hw = head.len() / batch.max(1);
        Ok((0..batch)
            .map(|n| {
                let row = &h[n * 2 * k..(n + 1) * 2 * k];
                let sp = |v: f64| v.max(0.0) + (-v.abs()).exp().ln_1p();
                let hr = &head[n * hw..(n + 1) * hw];
                let dim = if self.spec.variant == Variant::CpibCompound {
                    DimHead::Compound {
                        a: sp(hr[0]) + SHAPE_FLOOR,
                        b: sp(hr[1]) + SHAPE_FLOOR,
                    }
                } else {
                    DimHead::Logits(hr.to_vec())
                };
                EncoderOutput {
                    mu: row[..k].to_vec(),
                    sigma: row[k..].iter().map(|&v| sp(v) + SIGMA_FLOOR).collect(),
                    dim,
                }
            })
            .collect())
    }

    /// Posterior mode of the number of active dimensions (1-based) per datum.
    pub fn dim_modes(&self, x: &Tensor<T>) -> Result<Vec<usize>, ModelError> {
        self.encoder_outputs(x)?
            .iter()
            .map(|e| Ok(e.dim_mode()?))
            .collect()
    }
}

fn slab<'t, T: Scalar>(
    mu: Var<'t, T>,
    sigma: Var<'t, T>,
    eps: &Tensor<T>,
) -> Result<Var<'t, T>, ModelError> {
    let e = mu.tape().constant(eps.clone());
    Ok(mu.add(sigma.mul(e)?)?)
}

fn row_argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in row.iter().enumerate() {
        if *x > row[best] {
            best = i;
        }
    }
    best
}

/// Rows of `1(k <= argmax_k score)` for a `[rows, k]` score buffer.
fn hard_mask<T: Scalar>(score: &[f64], k: usize) -> Tensor<T> {
    let rows = score.len() / k;
    let mut data = vec![T::zero(); rows * k];
    for r in 0..rows {
        let d = argmax(&score[r * k..(r + 1) * k]);
        data[r * k..=r * k + d].fill(T::one());
    }
    Tensor::matrix(rows, k, data)
}
