use serde::{Deserialize, Serialize};

use crate::autograd::Tensor;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerConfig {
    Sgd {
        #[serde(default)]
        momentum: f64,
    },
    Adam {
        #[serde(default = "OptimizerConfig::b1")]
        beta1: f64,
        #[serde(default = "OptimizerConfig::b2")]
        beta2: f64,
        #[serde(default = "OptimizerConfig::eps")]
        eps: f64,
    },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::Adam {
            beta1: Self::b1(),
            beta2: Self::b2(),
            eps: Self::eps(),
        }
    }
}

impl OptimizerConfig {
    fn b1() -> f64 {
        0.9
    }
    fn b2() -> f64 {
        0.999
    }
    fn eps() -> f64 {
        1e-8
    }
}

/// Optimizer state for one parameter list.
#[derive(Clone, Debug)]
pub struct Optimizer<T: Scalar> {
    cfg: OptimizerConfig,
    lr: f64,
    t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(cfg: OptimizerConfig, lr: f64, params: &[Tensor<T>]) -> Self {
        let zeros = || params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        let v = match cfg {
            OptimizerConfig::Adam { .. } => zeros(),
            OptimizerConfig::Sgd { .. } => Vec::new(),
        };
        Self {
            cfg,
            lr,
            t: 0,
            m: zeros(),
            v,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) {
        self.t += 1;
        match self.cfg {
            OptimizerConfig::Sgd { momentum } => {
                let (lr, mu) = (T::of(self.lr), T::of(momentum));
                for ((p, g), m) in params.iter_mut().zip(grads).zip(&mut self.m) {
                    for ((w, &gi), mi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()) {
                        *mi = mu * *mi + gi;
                        *w = *w - lr * *mi;
                    }
                }
            }
            OptimizerConfig::Adam { beta1, beta2, eps } => {
                let t = self.t as i32;
                let step = self.lr * (1.0 - beta2.powi(t)).sqrt() / (1.0 - beta1.powi(t));
                let (b1, b2, step, eps) = (T::of(beta1), T::of(beta2), T::of(step), T::of(eps));
                let (c1, c2) = (T::one() - b1, T::one() - b2);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    let it = p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut());
                    for (((w, &gi), mi), vi) in it {
                        *mi = b1 * *mi + c1 * gi;
                        *vi = b2 * *vi + c2 * gi * gi;
                        *w = *w - step * *mi / (vi.sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Scales `grads` so their joint L2 norm is at most `max_norm`; returns the
/// norm before scaling.
pub fn clip_global_norm<T: Scalar>(grads: &mut [Tensor<T>], max_norm: f64) -> f64 {
    let sq: f64 = grads
        .iter()
        .flat_map(|g| g.data().iter())
        .map(|v| {
            let x = v.as_f64();
            x * x
        })
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = T::of(max_norm / norm);
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v = *v * s;
            }
        }
    }
    norm
}
