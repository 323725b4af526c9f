//! Dense reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation applied to [`Var`] handles in
//! construction order, which is already a topological order, so the backward
//! pass is a single reverse sweep. Parameters are copied onto a fresh tape for
//! every forward pass; tapes are single-use.
//!
//! Broadcasting is deliberately narrow: binary elementwise ops accept equal
//! shapes, or one operand whose shape is a trailing suffix of the other's
//! (a scalar being the empty suffix). Reductions and row-wise ops always act on
//! the last axis.
//!
//! ReLU uses the subgradient 0 at exactly 0.

mod gradcheck;
mod ops;
mod tape;
mod tensor;

pub use gradcheck::{gradcheck, gradcheck_many};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape {shape:?} does not match data length {len}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("tape already consumed by a backward pass")]
    SpentTape,
}
