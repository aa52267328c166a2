//! Define-by-run reverse-mode autodiff over dense matrices, plus Adam.
//!
//! A [`Tape`] records every operation as a node whose parents were created
//! earlier, so node order is already a topological order and the backward
//! pass is a single reverse sweep.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphOperators, SparseOperator};
use crate::linalg::Dense;
use crate::poly::{Propagator, SignalAlgebra};
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<'g, T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, T),
    Combine(T, Var, T, Var),
    MatMul(Var, Var),
    Spmm(&'g SparseOperator<T>, Var),
    Hadamard(Var, Var),
    RowScale { diag: Var, m: Var },
    ScalarMul { s: Var, m: Var },
    AddRowBroadcast { m: Var, b: Var },
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Dropout { x: Var, mask: Dense<T> },
    SoftmaxCrossEntropy { logits: Var, probs: Dense<T>, targets: Vec<Option<usize>>, count: usize },
    FrobeniusSq(Var),
    Sum(Var),
    Transpose(Var),
    ColumnNormalize { x: Var, norms: Vec<T> },
}

impl<T> Op<'_, T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Scale(..) => "scale",
            Op::Combine(..) => "combine",
            Op::MatMul(..) => "matmul",
            Op::Spmm(..) => "spmm",
            Op::Hadamard(..) => "hadamard",
            Op::RowScale { .. } => "row_scale",
            Op::ScalarMul { .. } => "scalar_mul",
            Op::AddRowBroadcast { .. } => "add_row_broadcast",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Dropout { .. } => "dropout",
            Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
            Op::FrobeniusSq(_) => "frobenius_sq",
            Op::Sum(_) => "sum",
            Op::Transpose(_) => "transpose",
            Op::ColumnNormalize { .. } => "column_normalize",
        }
    }
}

#[derive(Debug)]
struct Node<'g, T> {
    value: Dense<T>,
    op: Op<'g, T>,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape<'g, T> {
    nodes: Vec<Node<'g, T>>,
    grads: Option<Vec<Option<Dense<T>>>>,
}

fn mismatch(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Error {
    Error::ShapeMismatch { op, left, right }
}

impl<'g, T: Scalar> Tape<'g, T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Operation name and output shape of every recorded node, in order.
    pub fn trace(&self) -> Vec<(&'static str, (usize, usize))> {
        self.nodes.iter().map(|n| (n.op.name(), n.value.shape())).collect()
    }

    fn push(&mut self, value: Dense<T>, op: Op<'g, T>, parents: &[Var]) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Dense<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Dense<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Dense<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(value, Op::Sub(a, b), &[a, b]))
    }

    /// Multiplication by a constant.
    pub fn scalar_mul(&mut self, a: Var, s: T) -> Var {
        let value = self.value(a).scale(s);
        self.push(value, Op::Scale(a, s), &[a])
    }

    /// `p·x + q·y` for constants `p`, `q`.
    pub fn combine(&mut self, p: T, x: Var, q: T, y: Var) -> Result<Var> {
        let value = self.value(x).zip_map(self.value(y), "combine", |a, b| p * a + q * b)?;
        Ok(self.push(value, Op::Combine(p, x, q, y), &[x, y]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b), &[a, b]))
    }

    /// Fixed sparse operator times a dense value; the operator is data and
    /// gets no gradient.
    pub fn sparse_dense_matmul(&mut self, op: &'g SparseOperator<T>, x: Var) -> Result<Var> {
        let value = op.matmul(self.value(x))?;
        Ok(self.push(value, Op::Spmm(op, x), &[x]))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(value, Op::Hadamard(a, b), &[a, b]))
    }

    /// `diag(d) · m` for an `N×1` column `d`.
    pub fn row_scale(&mut self, diag: Var, m: Var) -> Result<Var> {
        let (dv, mv) = (self.value(diag), self.value(m));
        if dv.cols() != 1 || dv.rows() != mv.rows() {
            return Err(mismatch("row_scale", dv.shape(), mv.shape()));
        }
        let mut value = mv.clone();
        for i in 0..mv.rows() {
            let s = dv[(i, 0)];
            for v in value.row_mut(i) {
                *v *= s;
            }
        }
        Ok(self.push(value, Op::RowScale { diag, m }, &[diag, m]))
    }

    /// Multiplies `m` by the value of the `1×1` node `s`.
    pub fn mul_by_scalar_var(&mut self, s: Var, m: Var) -> Result<Var> {
        if self.shape(s) != (1, 1) {
            return Err(mismatch("scalar_mul", self.shape(s), (1, 1)));
        }
        let value = self.value(m).scale(self.value(s).item());
        Ok(self.push(value, Op::ScalarMul { s, m }, &[s, m]))
    }

    /// Adds the `1×c` row `b` to every row of `m`.
    pub fn add_row_broadcast(&mut self, m: Var, b: Var) -> Result<Var> {
        let (mv, bv) = (self.value(m), self.value(b));
        if bv.rows() != 1 || bv.cols() != mv.cols() {
            return Err(mismatch("add_row_broadcast", mv.shape(), bv.shape()));
        }
        let mut value = mv.clone();
        for i in 0..mv.rows() {
            for (v, &bb) in value.row_mut(i).iter_mut().zip(bv.row(0)) {
                *v += bb;
            }
        }
        Ok(self.push(value, Op::AddRowBroadcast { m, b }, &[m, b]))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(sigmoid);
        self.push(value, Op::Sigmoid(x), &[x])
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).map(T::tanh);
        self.push(value, Op::Tanh(x), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(T::zero()));
        self.push(value, Op::Relu(x), &[x])
    }

    /// Inverted dropout. Identity (no node recorded) when `train` is off or `p == 0`.
    pub fn dropout<R: Rng>(&mut self, x: Var, p: T, train: bool, rng: &mut R) -> Result<Var> {
        if !(p >= T::zero() && p < T::one()) {
            return Err(Error::InvalidArgument(format!("dropout probability {p} not in [0, 1)")));
        }
        if !train || p == T::zero() {
            return Ok(x);
        }
        let keep = T::one() / (T::one() - p);
        let pf = p.as_f64();
        let (r, c) = self.shape(x);
        let data = (0..r * c)
            .map(|_| if rng.gen::<f64>() < pf { T::zero() } else { keep })
            .collect();
        let mask = Dense::from_vec(r, c, data)?;
        let value = self.value(x).hadamard(&mask)?;
        Ok(self.push(value, Op::Dropout { x, mask }, &[x]))
    }

    /// Mean cross-entropy of row-wise softmax over the rows selected by `mask`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize], mask: &[bool]) -> Result<Var> {
        let z = self.value(logits);
        let (n, c) = z.shape();
        if targets.len() != n || mask.len() != n {
            return Err(mismatch("softmax_cross_entropy", (n, c), (targets.len(), mask.len())));
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(Error::EmptyMask);
        }
        let probs = softmax_rows(z);
        let mut loss = T::zero();
        let mut kept = Vec::with_capacity(n);
        for i in 0..n {
            if mask[i] {
                if targets[i] >= c {
                    return Err(Error::LabelOutOfRange {
                        node: i,
                        label: targets[i],
                        class_count: c,
                    });
                }
                let row = z.row(i);
                let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
                loss += lse - row[targets[i]];
                kept.push(Some(targets[i]));
            } else {
                kept.push(None);
            }
        }
        let value = Dense::scalar(loss / T::of_usize(count));
        Ok(self.push(
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                targets: kept,
                count,
            },
            &[logits],
        ))
    }

    pub fn frobenius_sq(&mut self, x: Var) -> Var {
        let value = Dense::scalar(self.value(x).frobenius_sq());
        self.push(value, Op::FrobeniusSq(x), &[x])
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Dense::scalar(self.value(x).sum());
        self.push(value, Op::Sum(x), &[x])
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).transpose();
        self.push(value, Op::Transpose(x), &[x])
    }

    /// Centers every column and scales it to unit l2 norm. A column whose
    /// centered norm vanishes is an error.
    pub fn column_normalize(&mut self, x: Var) -> Result<Var> {
        let (value, norms) = column_normalized(self.value(x))?;
        Ok(self.push(value, Op::ColumnNormalize { x, norms }, &[x]))
    }

    pub fn grad(&self, v: Var) -> Option<&Dense<T>> {
        self.grads.as_ref()?.get(v.0)?.as_ref()
    }

    pub fn reset_grads(&mut self) {
        self.grads = None;
    }

    /// Backpropagates from a `1×1` loss into every node that requires grad.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.grads.is_some() {
            return Err(Error::BackwardTwice);
        }
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(Error::NonScalarLoss(r, c));
        }
        let mut grads: Vec<Option<Dense<T>>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(Dense::scalar(T::one()));
        }
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let send = |grads: &mut Vec<Option<Dense<T>>>, to: Var, contrib: Dense<T>| {
                assert!(to.0 < idx, "tape parents must precede their children");
                if !self.nodes[to.0].requires_grad {
                    return;
                }
                match &mut grads[to.0] {
                    Some(acc) => acc.axpy(T::one(), &contrib).expect("gradient shape"),
                    slot => *slot = Some(contrib),
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    send(&mut grads, *a, g.clone());
                    send(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    send(&mut grads, *a, g.clone());
                    send(&mut grads, *b, g.scale(-T::one()));
                }
                Op::Scale(a, s) => send(&mut grads, *a, g.scale(*s)),
                Op::Combine(p, x, q, y) => {
                    send(&mut grads, *x, g.scale(*p));
                    send(&mut grads, *y, g.scale(*q));
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    if self.nodes[a.0].requires_grad {
                        send(&mut grads, *a, g.matmul_t(bv)?);
                    }
                    if self.nodes[b.0].requires_grad {
                        send(&mut grads, *b, av.t_matmul(&g)?);
                    }
                }
                Op::Spmm(op, x) => send(&mut grads, *x, op.t_matmul(&g)?),
                Op::Hadamard(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    send(&mut grads, *a, g.hadamard(bv)?);
                    send(&mut grads, *b, g.hadamard(av)?);
                }
                Op::RowScale { diag, m } => {
                    let (dv, mv) = (&self.nodes[diag.0].value, &self.nodes[m.0].value);
                    let mut gm = g.clone();
                    let mut gd = Dense::zeros(dv.rows(), 1);
                    for i in 0..g.rows() {
                        let s = dv[(i, 0)];
                        let mut acc = T::zero();
                        for (gv, &x) in gm.row_mut(i).iter_mut().zip(mv.row(i)) {
                            acc += *gv * x;
                            *gv *= s;
                        }
                        gd[(i, 0)] = acc;
                    }
                    send(&mut grads, *diag, gd);
                    send(&mut grads, *m, gm);
                }
                Op::ScalarMul { s, m } => {
                    let (sv, mv) = (self.nodes[s.0].value.item(), &self.nodes[m.0].value);
                    send(&mut grads, *s, Dense::scalar(g.hadamard(mv)?.sum()));
                    send(&mut grads, *m, g.scale(sv));
                }
                Op::AddRowBroadcast { m, b } => {
                    let mut gb = Dense::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (acc, &v) in gb.row_mut(0).iter_mut().zip(g.row(i)) {
                            *acc += v;
                        }
                    }
                    send(&mut grads, *m, g.clone());
                    send(&mut grads, *b, gb);
                }
                Op::Sigmoid(x) => {
                    let y = &node.value;
                    send(&mut grads, *x, g.zip_map(y, "sigmoid'", |gv, s| gv * s * (T::one() - s))?);
                }
                Op::Tanh(x) => {
                    let y = &node.value;
                    send(&mut grads, *x, g.zip_map(y, "tanh'", |gv, t| gv * (T::one() - t * t))?);
                }
                Op::Relu(x) => {
                    let xv = &self.nodes[x.0].value;
                    send(
                        &mut grads,
                        *x,
                        g.zip_map(xv, "relu'", |gv, v| if v > T::zero() { gv } else { T::zero() })?,
                    );
                }
                Op::Dropout { x, mask } => send(&mut grads, *x, g.hadamard(mask)?),
                Op::SoftmaxCrossEntropy {
                    logits,
                    probs,
                    targets,
                    count,
                } => {
                    let scale = g.item() / T::of_usize(*count);
                    let mut gz = Dense::zeros(probs.rows(), probs.cols());
                    for (i, t) in targets.iter().enumerate() {
                        if let Some(t) = t {
                            for (o, &p) in gz.row_mut(i).iter_mut().zip(probs.row(i)) {
                                *o = p * scale;
                            }
                            gz[(i, *t)] -= scale;
                        }
                    }
                    send(&mut grads, *logits, gz);
                }
                Op::FrobeniusSq(x) => {
                    let s = g.item() * T::of(2.0);
                    send(&mut grads, *x, self.nodes[x.0].value.scale(s));
                }
                Op::Sum(x) => {
                    let (r, c) = self.nodes[x.0].value.shape();
                    send(&mut grads, *x, Dense::filled(r, c, g.item()));
                }
                Op::Transpose(x) => send(&mut grads, *x, g.transpose()),
                Op::ColumnNormalize { x, norms } => {
                    let y = &node.value;
                    let (n, d) = y.shape();
                    let mut gx = Dense::zeros(n, d);
                    for c in 0..d {
                        let dot = (0..n).fold(T::zero(), |acc, r| acc + y[(r, c)] * g[(r, c)]);
                        let mut dc: Vec<T> =
                            (0..n).map(|r| (g[(r, c)] - y[(r, c)] * dot) / norms[c]).collect();
                        let mean = dc.iter().copied().sum::<T>() / T::of_usize(n);
                        for v in &mut dc {
                            *v -= mean;
                        }
                        gx.set_column(c, &dc);
                    }
                    send(&mut grads, *x, gx);
                }
            }
            grads[idx] = Some(g);
        }
        self.grads = Some(grads);
        Ok(())
    }
}

pub fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub fn softmax_rows<T: Scalar>(z: &Dense<T>) -> Dense<T> {
    let mut out = z.clone();
    for i in 0..z.rows() {
        let row = out.row_mut(i);
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Zero-mean, unit-l2 columns; also returns the centered norms.
pub fn column_normalized<T: Scalar>(x: &Dense<T>) -> Result<(Dense<T>, Vec<T>)> {
    let (n, d) = x.shape();
    let mut out = Dense::zeros(n, d);
    let mut norms = Vec::with_capacity(d);
    let floor = T::of(1e-12);
    for c in 0..d {
        let col = x.column(c);
        let mean = col.iter().copied().sum::<T>() / T::of_usize(n.max(1));
        let centered: Vec<T> = col.iter().map(|&v| v - mean).collect();
        let norm = centered.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
        if !(norm > floor) {
            return Err(Error::ZeroVarianceColumn(c));
        }
        let normalized: Vec<T> = centered.iter().map(|&v| v / norm).collect();
        out.set_column(c, &normalized);
        norms.push(norm);
    }
    Ok((out, norms))
}

/// [`SignalAlgebra`] that records basis recurrences on a tape.
pub struct TapeAlgebra<'t, 'g, T> {
    pub tape: &'t mut Tape<'g, T>,
    pub ops: &'g GraphOperators<T>,
}

impl<'g, T: Scalar> SignalAlgebra<T> for TapeAlgebra<'_, 'g, T> {
    type Signal = Var;

    fn propagate(&mut self, by: Propagator, x: &Var) -> Result<Var> {
        let op = match by {
            Propagator::Adjacency => &self.ops.adjacency,
            Propagator::Laplacian => &self.ops.laplacian,
            Propagator::Shifted => &self.ops.shifted,
        };
        self.tape.sparse_dense_matmul(op, *x)
    }

    fn combine(&mut self, a: T, x: &Var, b: T, y: &Var) -> Result<Var> {
        self.tape.combine(a, *x, b, *y)
    }

    fn scale(&mut self, a: T, x: &Var) -> Var {
        self.tape.scalar_mul(*x, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam moments for an ordered list of parameters.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Dense<T>>,
    second: Vec<Dense<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, shapes: &[(usize, usize)]) -> Self {
        AdamState {
            config,
            step: 0,
            first: shapes.iter().map(|&(r, c)| Dense::zeros(r, c)).collect(),
            second: shapes.iter().map(|&(r, c)| Dense::zeros(r, c)).collect(),
        }
    }

    /// One bias-corrected Adam update; L2 weight decay is folded into the
    /// gradient. Parameters whose gradient is `None` are left untouched,
    /// moments included.
    pub fn update(&mut self, params: &mut [&mut Dense<T>], grads: &[Option<&Dense<T>>]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::InvalidArgument(format!(
                "optimizer tracks {} parameters, got {} values and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (lr, eps, wd) = (T::of(c.lr), T::of(c.eps), T::of(c.weight_decay));
        let t = self.step as i32;
        let bias1 = T::one() - b1.powi(t);
        let bias2 = T::one() - b2.powi(t);
        for (idx, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let Some(g) = g else { continue };
            let (m, v) = (&mut self.first[idx], &mut self.second[idx]);
            if p.shape() != m.shape() || g.shape() != m.shape() {
                return Err(mismatch("adam", m.shape(), p.shape()));
            }
            let pd = p.as_mut_slice();
            for (((w, &gr), mm), vv) in pd
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                let gr = gr + wd * *w;
                *mm = b1 * *mm + (T::one() - b1) * gr;
                *vv = b2 * *vv + (T::one() - b2) * gr * gr;
                let m_hat = *mm / bias1;
                let v_hat = *vv / bias2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Uniform in `±√(6/(fan_in+fan_out))`.
pub fn glorot_uniform<T: Scalar, R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Dense<T> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::of(rng.gen_range(-bound..=bound)))
        .collect();
    Dense::from_vec(rows, cols, data).expect("length matches shape")
}

pub const CHECKPOINT_FORMAT: &str = "dsf-checkpoint-v1";

/// One named tensor in a checkpoint, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// JSON parameter checkpoint: `{"format": …, "params": [{name, rows, cols, values}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub params: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_tensors<'a, T: Scalar>(named: impl IntoIterator<Item = (String, &'a Dense<T>)>) -> Self {
        let params = named
            .into_iter()
            .map(|(name, m)| NamedTensor {
                name,
                rows: m.rows(),
                cols: m.cols(),
                values: m.as_slice().iter().map(|v| v.as_f64()).collect(),
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            params,
        }
    }

    pub fn get<T: Scalar>(&self, name: &str) -> Result<Dense<T>> {
        let t = self
            .params
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("checkpoint has no parameter {name:?}")))?;
        Dense::from_vec(t.rows, t.cols, t.values.iter().map(|&v| T::of(v)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidArgument(format!("unknown checkpoint format {:?}", c.format)));
        }
        Ok(c)
    }
}
