use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Tensor, TensorError, Var};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Named parameter tensors in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T: Scalar = f32> {
    info: Vec<ParamInfo>,
    values: Vec<Tensor<T>>,
}

impl<T: Scalar> Default for Params<T> {
    fn default() -> Self {
        Self {
            info: Vec::new(),
            values: Vec::new(),
        }
    }
}

impl<T: Scalar> Params<T> {
    pub(super) fn push(&mut self, name: String, value: Tensor<T>) -> usize {
        self.info.push(ParamInfo {
            name,
            shape: value.shape().to_vec(),
        });
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn info(&self) -> &[ParamInfo] {
        &self.info
    }

    pub fn values(&self) -> &[Tensor<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.info
            .iter()
            .position(|p| p.name == name)
            .map(|i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        let i = self.info.iter().position(|p| p.name == name)?;
        Some(&mut self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalars.
    pub fn count(&self) -> usize {
        self.values.iter().map(|t| t.len()).sum()
    }

    pub(super) fn bind<'t>(&self, tape: &'t Tape<T>, trainable: bool) -> Vec<Var<'t, T>> {
        self.values
            .iter()
            .map(|v| tape.leaf(v.clone(), trainable))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(super) enum Init {
    /// Uniform with variance `2 / fan_in`.
    Kaiming,
    /// Uniform with variance `1 / fan_in`.
    Lecun,
}

/// Stack of dense layers; parameter ids `first + 2 l` (weight `[in, out]`)
/// and `first + 2 l + 1` (bias `[out]`).
#[derive(Clone, Debug)]
pub(super) struct Mlp {
    first: usize,
    depth: usize,
}

impl Mlp {
    /// Appends layers `widths[0] -> widths[1] -> ...` to `params`. Hidden
    /// layers use Kaiming init, the output layer `last`.
    pub(super) fn build<T: Scalar, R: Rng + ?Sized>(
        params: &mut Params<T>,
        prefix: &str,
        widths: &[usize],
        last: Init,
        rng: &mut R,
    ) -> Self {
        let first = params.len();
        let depth = widths.len() - 1;
        for l in 0..depth {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let init = if l + 1 == depth { last } else { Init::Kaiming };
            let gain = match init {
                Init::Kaiming => 6.0,
                Init::Lecun => 3.0,
            };
            let bound = (gain / fan_in as f64).sqrt();
            let w = (0..fan_in * fan_out)
                .map(|_| T::of(rng.random_range(-bound..bound)))
                .collect();
            params.push(format!("{prefix}.{l}.weight"), Tensor::matrix(fan_in, fan_out, w));
            params.push(format!("{prefix}.{l}.bias"), Tensor::zeros(vec![fan_out]));
        }
        Self { first, depth }
    }

    pub(super) fn output_bias(&self) -> usize {
        self.first + 2 * (self.depth - 1) + 1
    }

    pub(super) fn output_weight(&self) -> usize {
        self.first + 2 * (self.depth - 1)
    }

    /// ReLU between layers; the output is linear unless `relu_out`.
    pub(super) fn forward<'t, T: Scalar>(
        &self,
        vars: &[Var<'t, T>],
        x: Var<'t, T>,
        relu_out: bool,
    ) -> Result<Var<'t, T>, TensorError> {
        let mut h = x;
        for l in 0..self.depth {
            let w = vars[self.first + 2 * l];
            let b = vars[self.first + 2 * l + 1];
            h = h.matmul(w)?.add(b)?;
            if l + 1 < self.depth || relu_out {
                h = h.relu()?;
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_init_bounds() {
        let mut p = Params::<f64>::default();
        let mut rng = crate::rng::stream(0, "init");
        let m = Mlp::build(&mut p, "enc", &[6, 4, 3], Init::Lecun, &mut rng);
        let names: Vec<_> = p.info().iter().map(|i| i.name.as_str()).collect();
        assert_eq!(names, ["enc.0.weight", "enc.0.bias", "enc.1.weight", "enc.1.bias"]);
        assert_eq!(p.info()[2].shape, vec![4, 3]);
        assert_eq!(m.output_bias(), 3);
        let b0 = (6.0f64 / 6.0).sqrt();
        assert!(p.values()[0].data().iter().all(|v| v.abs() <= b0));
        let b1 = (3.0f64 / 4.0).sqrt();
        assert!(p.values()[2].data().iter().all(|v| v.abs() <= b1));
        assert!(p.values()[1].data().iter().all(|&v| v == 0.0));
        assert_eq!(p.count(), 6 * 4 + 4 + 4 * 3 + 3);
    }
}
