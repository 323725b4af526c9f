use std::cell::{Cell, Ref, RefCell};
use std::fmt;

use crate::scalar::Scalar;

use super::ops;
use super::{Tensor, TensorError};

pub(super) type Vjp<T> = Box<dyn Fn(&[T]) -> Vec<T>>;

pub(super) enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Scale(usize, T),
    Offset(usize),
    MatMul(usize, usize),
    Relu(usize),
    Exp(usize),
    Log(usize),
    Softplus(usize),
    Sigmoid(usize),
    Softmax(usize),
    LogSoftmax(usize),
    Sum(usize),
    Mean(usize),
    SumLast(usize),
    Gather(usize, Vec<usize>),
    SliceLast(usize, usize),
    SuffixSum(usize),
    PrefixSum(usize),
    Custom(usize, Vjp<T>),
}

pub(super) struct Node<T> {
    pub(super) value: Tensor<T>,
    pub(super) op: Op<T>,
    pub(super) requires_grad: bool,
}

/// Records operations for one forward/backward pass.
pub struct Tape<T: Scalar = f64> {
    pub(super) nodes: RefCell<Vec<Node<T>>>,
    grads: RefCell<Vec<Option<Vec<T>>>>,
    spent: Cell<bool>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> fmt::Debug for Tape<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.nodes.borrow().len())
            .field("spent", &self.spent.get())
            .finish()
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Scalar = f64> {
    pub(super) tape: &'t Tape<T>,
    pub(super) id: usize,
}

impl<T: Scalar> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            grads: RefCell::new(Vec::new()),
            spent: Cell::new(false),
        }
    }

    /// Leaf whose gradient is accumulated by [`Tape::backward`].
    pub fn param(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf(value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf(value, false)
    }

    pub fn leaf(&self, value: Tensor<T>, requires_grad: bool) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(super) fn push(
        &self,
        name: &'static str,
        value: Tensor<T>,
        op: Op<T>,
        parents: &[usize],
    ) -> Result<Var<'_, T>, TensorError> {
        if self.spent.get() {
            return Err(TensorError::SpentTape);
        }
        if cfg!(debug_assertions) && !value.all_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = parents.iter().any(|&p| nodes[p].requires_grad);
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    /// Populates gradients of `loss` with respect to every `requires_grad`
    /// node. Gradients from multiple uses of a node add up.
    pub fn backward(&self, loss: Var<'_, T>) -> Result<(), TensorError> {
        if self.spent.get() {
            return Err(TensorError::SpentTape);
        }
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.len() != 1 {
            return Err(TensorError::NonScalarLoss(root.value.shape().to_vec()));
        }
        self.spent.set(true);

        let mut grads: Vec<Option<Vec<T>>> = Vec::with_capacity(nodes.len());
        grads.resize_with(nodes.len(), || None);
        if root.requires_grad {
            grads[loss.id] = Some(vec![T::one()]);
        }
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else {
                continue;
            };
            let node = &nodes[id];
            ops::propagate(&nodes, node, &g, &mut grads);
            grads[id] = Some(g);
        }
        *self.grads.borrow_mut() = grads;
        Ok(())
    }

    /// Gradient of the last backward pass with respect to `var`, if it was
    /// reached. Leaves that require grad but do not influence the loss get zeros.
    pub fn grad(&self, var: Var<'_, T>) -> Option<Tensor<T>> {
        let nodes = self.nodes.borrow();
        let node = &nodes[var.id];
        if !node.requires_grad || !self.spent.get() {
            return None;
        }
        let data = match self.grads.borrow().get(var.id).and_then(|g| g.clone()) {
            Some(g) => g,
            None => vec![T::zero(); node.value.len()],
        };
        Some(Tensor::new(node.value.shape().to_vec(), data).expect("grad shape"))
    }

    /// Like [`Tape::grad`] but moves the buffer out.
    pub fn take_grad(&self, var: Var<'_, T>) -> Option<Tensor<T>> {
        let nodes = self.nodes.borrow();
        let node = &nodes[var.id];
        if !node.requires_grad || !self.spent.get() {
            return None;
        }
        let data = match self.grads.borrow_mut().get_mut(var.id).and_then(|g| g.take()) {
            Some(g) => g,
            None => vec![T::zero(); node.value.len()],
        };
        Some(Tensor::new(node.value.shape().to_vec(), data).expect("grad shape"))
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Tensor<T>> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    /// Scalar value; panics if the variable holds more than one element.
    pub fn item(&self) -> T {
        let v = self.value();
        assert_eq!(v.len(), 1, "item() on non-scalar");
        v.data()[0]
    }

    pub fn grad(&self) -> Option<Tensor<T>> {
        self.tape.grad(*self)
    }
}
