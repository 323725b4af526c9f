//! Forward kernels (as `Var` methods) and their vector-Jacobian products.

use crate::scalar::Scalar;

use super::tape::{Node, Op, Var};
use super::{Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bcast {
    Same,
    /// Left operand is repeated with the given period.
    Left(usize),
    /// Right operand is repeated with the given period.
    Right(usize),
}

fn broadcast(
    op: &'static str,
    left: &[usize],
    right: &[usize],
) -> Result<(Vec<usize>, Bcast), TensorError> {
    if left == right {
        return Ok((left.to_vec(), Bcast::Same));
    }
    let ll: usize = left.iter().product();
    let lr: usize = right.iter().product();
    if lr == 1 || left.ends_with(right) {
        return Ok((left.to_vec(), Bcast::Right(lr)));
    }
    if ll == 1 || right.ends_with(left) {
        return Ok((right.to_vec(), Bcast::Left(ll)));
    }
    Err(TensorError::ShapeMismatch {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    })
}

fn bcast_of<T: Scalar>(nodes: &[Node<T>], a: usize, b: usize) -> Bcast {
    let (sa, sb) = (nodes[a].value.shape(), nodes[b].value.shape());
    if sa == sb {
        return Bcast::Same;
    }
    let (la, lb) = (nodes[a].value.len(), nodes[b].value.len());
    if lb == 1 || sa.ends_with(sb) {
        Bcast::Right(lb)
    } else {
        Bcast::Left(la)
    }
}

#[inline]
fn idx(i: usize, period: Option<usize>) -> usize {
    match period {
        Some(p) => i % p,
        None => i,
    }
}

fn periods(b: Bcast) -> (Option<usize>, Option<usize>) {
    match b {
        Bcast::Same => (None, None),
        Bcast::Left(p) => (Some(p), None),
        Bcast::Right(p) => (None, Some(p)),
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn rows_of(len: usize, width: usize) -> usize {
    if width == 0 {
        0
    } else {
        len / width
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    fn unary(
        self,
        name: &'static str,
        f: impl Fn(T) -> T,
        op: Op<T>,
    ) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let x = self.value();
            let data = x.data().iter().map(|&v| f(v)).collect();
            Tensor::new(x.shape().to_vec(), data)?
        };
        self.tape.push(name, out, op, &[self.id])
    }

    fn binary(
        self,
        other: Var<'t, T>,
        name: &'static str,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let (a, b) = (self.value(), other.value());
            let (shape, plan) = broadcast(name, a.shape(), b.shape())?;
            let (pa, pb) = periods(plan);
            let n: usize = shape.iter().product();
            let (ad, bd) = (a.data(), b.data());
            let data = (0..n).map(|i| f(ad[idx(i, pa)], bd[idx(i, pb)])).collect();
            Tensor::new(shape, data)?
        };
        self.tape.push(name, out, op, &[self.id, other.id])
    }

    pub fn add(self, other: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.binary(other, "add", |a, b| a + b, Op::Add(self.id, other.id))
    }

    pub fn sub(self, other: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.binary(other, "sub", |a, b| a - b, Op::Sub(self.id, other.id))
    }

    pub fn mul(self, other: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.binary(other, "mul", |a, b| a * b, Op::Mul(self.id, other.id))
    }

    pub fn div(self, other: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.binary(other, "div", |a, b| a / b, Op::Div(self.id, other.id))
    }

    pub fn square(self) -> Result<Var<'t, T>, TensorError> {
        self.mul(self)
    }

    pub fn neg(self) -> Result<Var<'t, T>, TensorError> {
        self.unary("neg", |x| -x, Op::Neg(self.id))
    }

    /// Multiplies by a constant.
    pub fn scale(self, c: f64) -> Result<Var<'t, T>, TensorError> {
        let c = T::of(c);
        self.unary("scale", |x| x * c, Op::Scale(self.id, c))
    }

    /// Adds a constant.
    pub fn offset(self, c: f64) -> Result<Var<'t, T>, TensorError> {
        let c = T::of(c);
        self.unary("offset", |x| x + c, Op::Offset(self.id))
    }

    pub fn relu(self) -> Result<Var<'t, T>, TensorError> {
        self.unary("relu", |x| x.max(T::zero()), Op::Relu(self.id))
    }

    pub fn exp(self) -> Result<Var<'t, T>, TensorError> {
        self.unary("exp", |x| x.exp(), Op::Exp(self.id))
    }

    pub fn log(self) -> Result<Var<'t, T>, TensorError> {
        self.unary("log", |x| x.ln(), Op::Log(self.id))
    }

    pub fn softplus(self) -> Result<Var<'t, T>, TensorError> {
        self.unary("softplus", softplus, Op::Softplus(self.id))
    }

    pub fn sigmoid(self) -> Result<Var<'t, T>, TensorError> {
        self.unary("sigmoid", sigmoid, Op::Sigmoid(self.id))
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(self, other: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let (a, b) = (self.value(), other.value());
            let (sa, sb) = (a.shape(), b.shape());
            if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
                return Err(TensorError::ShapeMismatch {
                    op: "matmul",
                    left: sa.to_vec(),
                    right: sb.to_vec(),
                });
            }
            let (m, k, n) = (sa[0], sa[1], sb[1]);
            let mut c = vec![T::zero(); m * n];
            if m * k * n > 0 {
                T::gemm(m, k, n, a.data(), false, b.data(), false, T::zero(), &mut c);
            }
            Tensor::new(vec![m, n], c)?
        };
        self.tape
            .push("matmul", out, Op::MatMul(self.id, other.id), &[self.id, other.id])
    }

    /// Softmax over the last axis, computed with max subtraction.
    pub fn softmax(self) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let x = self.value();
            let w = x.last_dim();
            let mut data = x.data().to_vec();
            for row in data.chunks_mut(w.max(1)) {
                let m = row.iter().copied().fold(T::neg_infinity(), T::max);
                let mut s = T::zero();
                for v in row.iter_mut() {
                    *v = (*v - m).exp();
                    s = s + *v;
                }
                for v in row.iter_mut() {
                    *v = *v / s;
                }
            }
            Tensor::new(x.shape().to_vec(), data)?
        };
        self.tape
            .push("softmax", out, Op::Softmax(self.id), &[self.id])
    }

    /// Log-softmax over the last axis, fused so it never takes `log(0)`.
    pub fn log_softmax(self) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let x = self.value();
            let w = x.last_dim();
            let mut data = x.data().to_vec();
            for row in data.chunks_mut(w.max(1)) {
                let m = row.iter().copied().fold(T::neg_infinity(), T::max);
                let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
                for v in row.iter_mut() {
                    *v = *v - lse;
                }
            }
            Tensor::new(x.shape().to_vec(), data)?
        };
        self.tape
            .push("log_softmax", out, Op::LogSoftmax(self.id), &[self.id])
    }

    pub fn sum(self) -> Result<Var<'t, T>, TensorError> {
        let s = self.value().data().iter().copied().sum();
        self.tape
            .push("sum", Tensor::scalar(s), Op::Sum(self.id), &[self.id])
    }

    pub fn mean(self) -> Result<Var<'t, T>, TensorError> {
        let (s, n) = {
            let v = self.value();
            (v.data().iter().copied().sum::<T>(), v.len())
        };
        if n == 0 {
            return Err(TensorError::InvalidArgument {
                op: "mean",
                reason: "empty tensor".into(),
            });
        }
        let m = s / T::of(n as f64);
        self.tape
            .push("mean", Tensor::scalar(m), Op::Mean(self.id), &[self.id])
    }

    /// Sums over the last axis, dropping it.
    pub fn sum_last(self) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let x = self.value();
            let w = x.last_dim();
            let data = x.data().chunks(w.max(1)).map(|r| r.iter().copied().sum()).collect();
            let shape = x.shape()[..x.ndim().saturating_sub(1)].to_vec();
            Tensor::new(shape, data)?
        };
        self.tape
            .push("sum_last", out, Op::SumLast(self.id), &[self.id])
    }

    /// Picks `x[r, index[r]]` from each row of the last axis.
    pub fn gather(self, index: &[usize]) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let x = self.value();
            let w = x.last_dim();
            let rows = rows_of(x.len(), w);
            if index.len() != rows {
                return Err(TensorError::InvalidArgument {
                    op: "gather",
                    reason: format!("{} indices for {} rows", index.len(), rows),
                });
            }
            if let Some(&bad) = index.iter().find(|&&i| i >= w) {
                return Err(TensorError::InvalidArgument {
                    op: "gather",
                    reason: format!("index {bad} out of range for width {w}"),
                });
            }
            let data = index.iter().enumerate().map(|(r, &i)| x.data()[r * w + i]).collect();
            let shape = x.shape()[..x.ndim().saturating_sub(1)].to_vec();
            Tensor::new(shape, data)?
        };
        self.tape.push(
            "gather",
            out,
            Op::Gather(self.id, index.to_vec()),
            &[self.id],
        )
    }

    /// Columns `start..start + len` of the last axis.
    pub fn slice_last(self, start: usize, len: usize) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let x = self.value();
            let w = x.last_dim();
            if start + len > w {
                return Err(TensorError::InvalidArgument {
                    op: "slice_last",
                    reason: format!("range {start}..{} exceeds width {w}", start + len),
                });
            }
            let data = x
                .data()
                .chunks(w.max(1))
                .flat_map(|r| r[start..start + len].iter().copied())
                .collect();
            let mut shape = x.shape().to_vec();
            if let Some(last) = shape.last_mut() {
                *last = len;
            }
            Tensor::new(shape, data)?
        };
        self.tape
            .push("slice_last", out, Op::SliceLast(self.id, start), &[self.id])
    }

    /// `y_k = sum_{j >= k} x_j` along the last axis.
    pub fn suffix_sum(self) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let x = self.value();
            let mut data = x.data().to_vec();
            for row in data.chunks_mut(x.last_dim().max(1)) {
                suffix_in_place(row);
            }
            Tensor::new(x.shape().to_vec(), data)?
        };
        self.tape
            .push("suffix_sum", out, Op::SuffixSum(self.id), &[self.id])
    }

    /// `y_k = sum_{j <= k} x_j` along the last axis.
    pub fn prefix_sum(self) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let x = self.value();
            let mut data = x.data().to_vec();
            for row in data.chunks_mut(x.last_dim().max(1)) {
                prefix_in_place(row);
            }
            Tensor::new(x.shape().to_vec(), data)?
        };
        self.tape
            .push("prefix_sum", out, Op::PrefixSum(self.id), &[self.id])
    }

    /// Records an op whose forward value was computed by the caller. `vjp`
    /// maps the output gradient to the input gradient.
    pub fn custom_unary(
        self,
        name: &'static str,
        value: Tensor<T>,
        vjp: impl Fn(&[T]) -> Vec<T> + 'static,
    ) -> Result<Var<'t, T>, TensorError> {
        self.tape
            .push(name, value, Op::Custom(self.id, Box::new(vjp)), &[self.id])
    }
}

fn suffix_in_place<T: Scalar>(row: &mut [T]) {
    let mut acc = T::zero();
    for v in row.iter_mut().rev() {
        acc = acc + *v;
        *v = acc;
    }
}

fn prefix_in_place<T: Scalar>(row: &mut [T]) {
    let mut acc = T::zero();
    for v in row.iter_mut() {
        acc = acc + *v;
        *v = acc;
    }
}

fn slot<'g, T: Scalar>(
    grads: &'g mut [Option<Vec<T>>],
    nodes: &[Node<T>],
    id: usize,
) -> &'g mut Vec<T> {
    grads[id].get_or_insert_with(|| vec![T::zero(); nodes[id].value.len()])
}

fn bin_grad<T: Scalar>(
    nodes: &[Node<T>],
    grads: &mut [Option<Vec<T>>],
    (a, b): (usize, usize),
    g: &[T],
    da: impl Fn(T, T, T) -> T,
    db: impl Fn(T, T, T) -> T,
) {
    let (pa, pb) = periods(bcast_of(nodes, a, b));
    let (x, y) = (nodes[a].value.data(), nodes[b].value.data());
    if nodes[a].requires_grad {
        let ga = slot(grads, nodes, a);
        for (i, &gi) in g.iter().enumerate() {
            let (ia, ib) = (idx(i, pa), idx(i, pb));
            ga[ia] = ga[ia] + da(gi, x[ia], y[ib]);
        }
    }
    if nodes[b].requires_grad {
        let gb = slot(grads, nodes, b);
        for (i, &gi) in g.iter().enumerate() {
            let (ia, ib) = (idx(i, pa), idx(i, pb));
            gb[ib] = gb[ib] + db(gi, x[ia], y[ib]);
        }
    }
}

fn unary_grad<T: Scalar>(
    nodes: &[Node<T>],
    grads: &mut [Option<Vec<T>>],
    x: usize,
    g: &[T],
    out: &[T],
    f: impl Fn(T, T, T) -> T,
) {
    if !nodes[x].requires_grad {
        return;
    }
    let xs = nodes[x].value.data();
    let gx = slot(grads, nodes, x);
    for i in 0..g.len() {
        gx[i] = gx[i] + f(g[i], xs[i], out[i]);
    }
}

pub(super) fn propagate<T: Scalar>(
    nodes: &[Node<T>],
    node: &Node<T>,
    g: &[T],
    grads: &mut [Option<Vec<T>>],
) {
    let out = node.value.data();
    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) => bin_grad(nodes, grads, (*a, *b), g, |g, _, _| g, |g, _, _| g),
        Op::Sub(a, b) => bin_grad(nodes, grads, (*a, *b), g, |g, _, _| g, |g, _, _| -g),
        Op::Mul(a, b) => bin_grad(nodes, grads, (*a, *b), g, |g, _, y| g * y, |g, x, _| g * x),
        Op::Div(a, b) => bin_grad(
            nodes,
            grads,
            (*a, *b),
            g,
            |g, _, y| g / y,
            |g, x, y| -g * x / (y * y),
        ),
        Op::Neg(x) => unary_grad(nodes, grads, *x, g, out, |g, _, _| -g),
        Op::Scale(x, c) => {
            let c = *c;
            unary_grad(nodes, grads, *x, g, out, |g, _, _| g * c)
        }
        Op::Offset(x) => unary_grad(nodes, grads, *x, g, out, |g, _, _| g),
        Op::Relu(x) => unary_grad(nodes, grads, *x, g, out, |g, x, _| {
            if x > T::zero() {
                g
            } else {
                T::zero()
            }
        }),
        Op::Exp(x) => unary_grad(nodes, grads, *x, g, out, |g, _, y| g * y),
        Op::Log(x) => unary_grad(nodes, grads, *x, g, out, |g, x, _| g / x),
        Op::Softplus(x) => unary_grad(nodes, grads, *x, g, out, |g, x, _| g * sigmoid(x)),
        Op::Sigmoid(x) => {
            unary_grad(nodes, grads, *x, g, out, |g, _, y| g * y * (T::one() - y))
        }
        Op::Softmax(x) => {
            if nodes[*x].requires_grad {
                let w = node.value.last_dim().max(1);
                let gx = slot(grads, nodes, *x);
                for ((gr, yr), gxr) in g.chunks(w).zip(out.chunks(w)).zip(gx.chunks_mut(w)) {
                    let s: T = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                    for j in 0..w {
                        gxr[j] = gxr[j] + yr[j] * (gr[j] - s);
                    }
                }
            }
        }
        Op::LogSoftmax(x) => {
            if nodes[*x].requires_grad {
                let w = node.value.last_dim().max(1);
                let gx = slot(grads, nodes, *x);
                for ((gr, yr), gxr) in g.chunks(w).zip(out.chunks(w)).zip(gx.chunks_mut(w)) {
                    let s: T = gr.iter().copied().sum();
                    for j in 0..w {
                        gxr[j] = gxr[j] + gr[j] - yr[j].exp() * s;
                    }
                }
            }
        }
        Op::Sum(x) => {
            if nodes[*x].requires_grad {
                let gx = slot(grads, nodes, *x);
                for v in gx.iter_mut() {
                    *v = *v + g[0];
                }
            }
        }
        Op::Mean(x) => {
            if nodes[*x].requires_grad {
                let gx = slot(grads, nodes, *x);
                let share = g[0] / T::of(gx.len() as f64);
                for v in gx.iter_mut() {
                    *v = *v + share;
                }
            }
        }
        Op::SumLast(x) => {
            if nodes[*x].requires_grad {
                let w = nodes[*x].value.last_dim().max(1);
                let gx = slot(grads, nodes, *x);
                for (r, row) in gx.chunks_mut(w).enumerate() {
                    for v in row.iter_mut() {
                        *v = *v + g[r];
                    }
                }
            }
        }
        Op::Gather(x, index) => {
            if nodes[*x].requires_grad {
                let w = nodes[*x].value.last_dim();
                let gx = slot(grads, nodes, *x);
                for (r, &i) in index.iter().enumerate() {
                    gx[r * w + i] = gx[r * w + i] + g[r];
                }
            }
        }
        Op::SliceLast(x, start) => {
            if nodes[*x].requires_grad {
                let wi = nodes[*x].value.last_dim();
                let wo = node.value.last_dim();
                let gx = slot(grads, nodes, *x);
                if wo > 0 {
                    for (r, gr) in g.chunks(wo).enumerate() {
                        for (j, &v) in gr.iter().enumerate() {
                            let k = r * wi + start + j;
                            gx[k] = gx[k] + v;
                        }
                    }
                }
            }
        }
        Op::SuffixSum(x) | Op::PrefixSum(x) => {
            if nodes[*x].requires_grad {
                let w = node.value.last_dim().max(1);
                let mut local = g.to_vec();
                for row in local.chunks_mut(w) {
                    // The adjoint of a suffix sum is a prefix sum and vice versa.
                    if matches!(node.op, Op::SuffixSum(_)) {
                        prefix_in_place(row);
                    } else {
                        suffix_in_place(row);
                    }
                }
                let gx = slot(grads, nodes, *x);
                for (a, b) in gx.iter_mut().zip(local) {
                    *a = *a + b;
                }
            }
        }
        Op::MatMul(a, b) => {
            let (sa, sb) = (nodes[*a].value.shape(), nodes[*b].value.shape());
            let (m, k, n) = (sa[0], sa[1], sb[1]);
            if m * k * n == 0 {
                return;
            }
            if nodes[*a].requires_grad {
                let bv = nodes[*b].value.data();
                let ga = slot(grads, nodes, *a);
                T::gemm(m, n, k, g, false, bv, true, T::one(), ga);
            }
            if nodes[*b].requires_grad {
                let av = nodes[*a].value.data();
                let gb = slot(grads, nodes, *b);
                T::gemm(k, m, n, av, true, g, false, T::one(), gb);
            }
        }
        Op::Custom(x, vjp) => {
            if nodes[*x].requires_grad {
                let local = vjp(g);
                let gx = slot(grads, nodes, *x);
                for (a, b) in gx.iter_mut().zip(local) {
                    *a = *a + b;
                }
            }
        }
    }
}
