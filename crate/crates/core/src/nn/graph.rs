//! Define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s. Nodes are
//! appended in evaluation order, which is already a topological order, so
//! [`Graph::backward`] is a single reverse sweep.

use std::cell::RefCell;

use crate::angle;
use crate::error::{Error, Result};
use crate::nn::tensor::{gemm_acc, Tensor};

/// Handle to a value recorded in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Softplus(Var),
    Concat(Vec<Var>),
    Slice(Var, usize, usize),
    Reshape(Var),
    Sum(Var),
    Mean(Var),
    Mse(Var, Var),
    Lsq(Var, f64),
    BceWithLogits(Var, Var),
    Wrap(Var),
    Reverse(Var),
    PoolTime(Var, usize),
    MeanTime(Var),
    Gru(Box<crate::nn::gru::GruTape>),
}

pub(crate) struct Node {
    pub(crate) value: Tensor,
    pub(crate) op: Op,
    pub(crate) requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

fn mismatch(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::usage(format!("{op}: incompatible shapes {a:?} and {b:?}"))
}

/// Splits a shape into (leading element count, last dimension).
fn rows_cols(shape: &[usize]) -> (usize, usize) {
    let cols = *shape.last().unwrap_or(&1);
    let rows = if cols == 0 { 0 } else { shape.iter().product::<usize>() / cols };
    (rows, cols)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid_f(x: f64) -> f64 {
    sigmoid(x)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    pub(crate) fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter().any(|v| nodes[v.0].requires_grad)
    }

    /// A value that gradients never flow into.
    pub fn constant(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A trainable leaf.
    pub fn leaf(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Copy of `v` cut off from the graph.
    pub fn detach(&self, v: Var) -> Var {
        let value = self.value(v);
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> Tensor {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    pub fn item(&self, v: Var) -> f64 {
        self.nodes.borrow()[v.0].value.item()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    fn unary(&self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| f(*v)).collect()).expect("same shape")
        };
        let rg = self.needs(&[a]);
        self.push(value, op, rg)
    }

    fn binary_same_shape(&self, name: &str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (x, y) = (&nodes[a.0].value, &nodes[b.0].value);
            if x.shape() != y.shape() {
                return Err(mismatch(name, x.shape(), y.shape()));
            }
            let data = x.data().iter().zip(y.data()).map(|(p, q)| f(*p, *q)).collect();
            Tensor::new(x.shape().to_vec(), data)?
        };
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    /// `[m, k] · [k, n]`.
    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (x, y) = (&nodes[a.0].value, &nodes[b.0].value);
            let (xs, ys) = (x.shape(), y.shape());
            if xs.len() != 2 || ys.len() != 2 || xs[1] != ys[0] {
                return Err(mismatch("matmul", xs, ys));
            }
            let (m, k, n) = (xs[0], xs[1], ys[1]);
            let mut out = vec![0.0; m * n];
            gemm_acc(&mut out, x.data(), y.data(), m, k, n, false, false);
            Tensor::new(vec![m, n], out)?
        };
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("add", a, b, |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("sub", a, b, |p, q| p - q, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("mul", a, b, |p, q| p * q, Op::Mul(a, b))
    }

    /// Adds a bias vector to every row: `[.., n] + [n]`.
    pub fn add_row(&self, a: Var, bias: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (x, b) = (&nodes[a.0].value, &nodes[bias.0].value);
            let (_, cols) = rows_cols(x.shape());
            if b.shape() != [cols] {
                return Err(mismatch("add_row", x.shape(), b.shape()));
            }
            let data = x
                .data()
                .chunks_exact(cols)
                .flat_map(|row| row.iter().zip(b.data()).map(|(p, q)| p + q))
                .collect();
            Tensor::new(x.shape().to_vec(), data)?
        };
        let rg = self.needs(&[a, bias]);
        Ok(self.push(value, Op::AddRow(a, bias), rg))
    }

    pub fn scale(&self, a: Var, factor: f64) -> Var {
        self.unary(a, |v| v * factor, Op::Scale(a, factor))
    }

    pub fn tanh(&self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn relu(&self, a: Var) -> Var {
        self.unary(a, |v| v.max(0.0), Op::Relu(a))
    }

    pub fn softplus(&self, a: Var) -> Var {
        self.unary(a, softplus, Op::Softplus(a))
    }

    /// Angle wrap into (-π, π]; the gradient passes through unchanged.
    pub fn wrap_angle(&self, a: Var) -> Var {
        self.unary(a, angle::wrap, Op::Wrap(a))
    }

    /// Concatenate along the last axis.
    pub fn concat(&self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::usage("concat of nothing"));
        }
        let value = {
            let nodes = self.nodes.borrow();
            let first = nodes[parts[0].0].value.shape();
            let lead = &first[..first.len() - 1];
            let (rows, _) = rows_cols(first);
            let mut total = 0;
            for p in parts {
                let s = nodes[p.0].value.shape();
                if s.len() != first.len() || &s[..s.len() - 1] != lead {
                    return Err(mismatch("concat", first, s));
                }
                total += s[s.len() - 1];
            }
            let mut data = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for p in parts {
                    let t = &nodes[p.0].value;
                    let (_, c) = rows_cols(t.shape());
                    data.extend_from_slice(&t.data()[r * c..(r + 1) * c]);
                }
            }
            let mut shape = lead.to_vec();
            shape.push(total);
            Tensor::new(shape, data)?
        };
        let rg = self.needs(parts);
        Ok(self.push(value, Op::Concat(parts.to_vec()), rg))
    }

    /// Columns `start..end` of the last axis.
    pub fn slice(&self, a: Var, start: usize, end: usize) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            let (_, cols) = rows_cols(x.shape());
            if start >= end || end > cols {
                return Err(Error::usage(format!(
                    "slice: range {start}..{end} invalid for shape {:?}",
                    x.shape()
                )));
            }
            let data = x.data().chunks_exact(cols).flat_map(|row| row[start..end].iter().copied()).collect();
            let mut shape = x.shape().to_vec();
            *shape.last_mut().expect("non-empty shape") = end - start;
            Tensor::new(shape, data)?
        };
        let rg = self.needs(&[a]);
        Ok(self.push(value, Op::Slice(a, start, end), rg))
    }

    pub fn reshape(&self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self
            .value(a)
            .reshaped(shape)
            .map_err(|_| mismatch("reshape", &self.shape(a), shape))?;
        let rg = self.needs(&[a]);
        Ok(self.push(value, Op::Reshape(a), rg))
    }

    pub fn sum(&self, a: Var) -> Var {
        let total = self.nodes.borrow()[a.0].value.data().iter().sum();
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(total), Op::Sum(a), rg)
    }

    pub fn mean(&self, a: Var) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            x.data().iter().sum::<f64>() / x.len() as f64
        };
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(value), Op::Mean(a), rg)
    }

    /// Mean squared difference.
    pub fn mse(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (x, y) = (&nodes[a.0].value, &nodes[b.0].value);
            if x.shape() != y.shape() {
                return Err(mismatch("mse", x.shape(), y.shape()));
            }
            x.data().iter().zip(y.data()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / x.len() as f64
        };
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::scalar(value), Op::Mse(a, b), rg))
    }

    /// Mean of `(a - target)²` against a constant target.
    pub fn lsq(&self, a: Var, target: f64) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            x.data().iter().map(|p| (p - target) * (p - target)).sum::<f64>() / x.len() as f64
        };
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(value), Op::Lsq(a, target), rg)
    }

    /// Mean binary cross-entropy of logits against targets in [0, 1].
    pub fn bce_with_logits(&self, logits: Var, targets: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (x, t) = (&nodes[logits.0].value, &nodes[targets.0].value);
            if x.shape() != t.shape() {
                return Err(mismatch("bce_with_logits", x.shape(), t.shape()));
            }
            x.data()
                .iter()
                .zip(t.data())
                .map(|(x, t)| x.max(0.0) - x * t + (-x.abs()).exp().ln_1p())
                .sum::<f64>()
                / x.len() as f64
        };
        let rg = self.needs(&[logits, targets]);
        Ok(self.push(Tensor::scalar(value), Op::BceWithLogits(logits, targets), rg))
    }

    fn check_seq(&self, name: &str, a: Var) -> Result<(usize, usize, usize)> {
        let s = self.shape(a);
        match s.as_slice() {
            [b, t, c] => Ok((*b, *t, *c)),
            _ => Err(Error::usage(format!("{name}: expected [batch, time, channels], got {s:?}"))),
        }
    }

    /// Reverse the time axis of `[batch, time, channels]`.
    pub fn reverse_time(&self, a: Var) -> Result<Var> {
        let (b, t, c) = self.check_seq("reverse_time", a)?;
        let value = {
            let nodes = self.nodes.borrow();
            let x = nodes[a.0].value.data();
            let mut out = Vec::with_capacity(x.len());
            for bi in 0..b {
                for ti in (0..t).rev() {
                    let off = (bi * t + ti) * c;
                    out.extend_from_slice(&x[off..off + c]);
                }
            }
            Tensor::new(vec![b, t, c], out)?
        };
        let rg = self.needs(&[a]);
        Ok(self.push(value, Op::Reverse(a), rg))
    }

    /// Average non-overlapping blocks of `factor` time steps.
    pub fn pool_time(&self, a: Var, factor: usize) -> Result<Var> {
        let (b, t, c) = self.check_seq("pool_time", a)?;
        if factor == 0 || t % factor != 0 {
            return Err(Error::usage(format!("pool_time: length {t} not divisible by {factor}")));
        }
        let to = t / factor;
        let value = {
            let nodes = self.nodes.borrow();
            let x = nodes[a.0].value.data();
            let mut out = vec![0.0; b * to * c];
            for bi in 0..b {
                for ti in 0..t {
                    let src = (bi * t + ti) * c;
                    let dst = (bi * to + ti / factor) * c;
                    for ci in 0..c {
                        out[dst + ci] += x[src + ci] / factor as f64;
                    }
                }
            }
            Tensor::new(vec![b, to, c], out)?
        };
        let rg = self.needs(&[a]);
        Ok(self.push(value, Op::PoolTime(a, factor), rg))
    }

    /// Average over the time axis: `[batch, time, channels] -> [batch, channels]`.
    pub fn mean_time(&self, a: Var) -> Result<Var> {
        let (b, t, c) = self.check_seq("mean_time", a)?;
        let value = {
            let nodes = self.nodes.borrow();
            let x = nodes[a.0].value.data();
            let mut out = vec![0.0; b * c];
            for bi in 0..b {
                for ti in 0..t {
                    let src = (bi * t + ti) * c;
                    for ci in 0..c {
                        out[bi * c + ci] += x[src + ci] / t as f64;
                    }
                }
            }
            Tensor::new(vec![b, c], out)?
        };
        let rg = self.needs(&[a]);
        Ok(self.push(value, Op::MeanTime(a), rg))
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        if nodes[loss.0].value.len() != 1 {
            return Err(Error::usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            backprop_node(&nodes, node, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(nodes: &[Node], grads: &mut [Option<Vec<f64>>], v: Var, contribution: impl FnOnce(&mut [f64])) {
    if !nodes[v.0].requires_grad {
        return;
    }
    let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
    contribution(slot);
}

fn add_into(dst: &mut [f64], src: impl IntoIterator<Item = f64>) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn backprop_node(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let val = |v: &Var| &nodes[v.0].value;
    let y = node.value.data();
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (xs, ys) = (val(a).shape(), val(b).shape());
            let (m, k, n) = (xs[0], xs[1], ys[1]);
            let (xa, xb) = (val(a).data(), val(b).data());
            accumulate(nodes, grads, *a, |d| gemm_acc(d, g, xb, m, n, k, false, true));
            accumulate(nodes, grads, *b, |d| gemm_acc(d, xa, g, k, m, n, true, false));
        }
        Op::Add(a, b) => {
            accumulate(nodes, grads, *a, |d| add_into(d, g.iter().copied()));
            accumulate(nodes, grads, *b, |d| add_into(d, g.iter().copied()));
        }
        Op::Sub(a, b) => {
            accumulate(nodes, grads, *a, |d| add_into(d, g.iter().copied()));
            accumulate(nodes, grads, *b, |d| add_into(d, g.iter().map(|v| -v)));
        }
        Op::Mul(a, b) => {
            let (xa, xb) = (val(a).data(), val(b).data());
            accumulate(nodes, grads, *a, |d| add_into(d, g.iter().zip(xb).map(|(g, q)| g * q)));
            accumulate(nodes, grads, *b, |d| add_into(d, g.iter().zip(xa).map(|(g, p)| g * p)));
        }
        Op::AddRow(a, bias) => {
            let cols = val(bias).len();
            accumulate(nodes, grads, *a, |d| add_into(d, g.iter().copied()));
            accumulate(nodes, grads, *bias, |d| {
                for row in g.chunks_exact(cols) {
                    add_into(d, row.iter().copied());
                }
            });
        }
        Op::Scale(a, f) => accumulate(nodes, grads, *a, |d| add_into(d, g.iter().map(|v| v * f))),
        Op::Tanh(a) => accumulate(nodes, grads, *a, |d| add_into(d, g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)))),
        Op::Sigmoid(a) => accumulate(nodes, grads, *a, |d| add_into(d, g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)))),
        Op::Relu(a) => {
            let x = val(a).data();
            accumulate(nodes, grads, *a, |d| add_into(d, g.iter().zip(x).map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })));
        }
        Op::Softplus(a) => {
            let x = val(a).data();
            accumulate(nodes, grads, *a, |d| add_into(d, g.iter().zip(x).map(|(g, x)| g * sigmoid(*x))));
        }
        Op::Wrap(a) | Op::Reshape(a) => accumulate(nodes, grads, *a, |d| add_into(d, g.iter().copied())),
        Op::Concat(parts) => {
            let (rows, total) = rows_cols(node.value.shape());
            let mut offset = 0;
            for p in parts {
                let (_, c) = rows_cols(val(p).shape());
                accumulate(nodes, grads, *p, |d| {
                    for r in 0..rows {
                        add_into(&mut d[r * c..(r + 1) * c], g[r * total + offset..r * total + offset + c].iter().copied());
                    }
                });
                offset += c;
            }
        }
        Op::Slice(a, start, end) => {
            let (_, cols) = rows_cols(val(a).shape());
            let w = end - start;
            accumulate(nodes, grads, *a, |d| {
                for (r, row) in g.chunks_exact(w).enumerate() {
                    add_into(&mut d[r * cols + start..r * cols + end], row.iter().copied());
                }
            });
        }
        Op::Sum(a) => accumulate(nodes, grads, *a, |d| d.iter_mut().for_each(|v| *v += g[0])),
        Op::Mean(a) => {
            let n = val(a).len() as f64;
            accumulate(nodes, grads, *a, |d| d.iter_mut().for_each(|v| *v += g[0] / n));
        }
        Op::Mse(a, b) => {
            let (xa, xb) = (val(a).data(), val(b).data());
            let k = 2.0 * g[0] / xa.len() as f64;
            accumulate(nodes, grads, *a, |d| add_into(d, xa.iter().zip(xb).map(|(p, q)| k * (p - q))));
            accumulate(nodes, grads, *b, |d| add_into(d, xa.iter().zip(xb).map(|(p, q)| -k * (p - q))));
        }
        Op::Lsq(a, target) => {
            let x = val(a).data();
            let k = 2.0 * g[0] / x.len() as f64;
            accumulate(nodes, grads, *a, |d| add_into(d, x.iter().map(|p| k * (p - target))));
        }
        Op::BceWithLogits(logits, targets) => {
            let (x, t) = (val(logits).data(), val(targets).data());
            let k = g[0] / x.len() as f64;
            accumulate(nodes, grads, *logits, |d| add_into(d, x.iter().zip(t).map(|(x, t)| k * (sigmoid(*x) - t))));
            accumulate(nodes, grads, *targets, |d| add_into(d, x.iter().map(|x| -k * x)));
        }
        Op::Reverse(a) => {
            let s = val(a).shape();
            let (b, t, c) = (s[0], s[1], s[2]);
            accumulate(nodes, grads, *a, |d| {
                for bi in 0..b {
                    for ti in 0..t {
                        let src = (bi * t + (t - 1 - ti)) * c;
                        let dst = (bi * t + ti) * c;
                        add_into(&mut d[dst..dst + c], g[src..src + c].iter().copied());
                    }
                }
            });
        }
        Op::PoolTime(a, factor) => {
            let s = val(a).shape();
            let (b, t, c) = (s[0], s[1], s[2]);
            let to = t / factor;
            accumulate(nodes, grads, *a, |d| {
                for bi in 0..b {
                    for ti in 0..t {
                        let dst = (bi * t + ti) * c;
                        let src = (bi * to + ti / factor) * c;
                        add_into(&mut d[dst..dst + c], g[src..src + c].iter().map(|v| v / *factor as f64));
                    }
                }
            });
        }
        Op::MeanTime(a) => {
            let s = val(a).shape();
            let (b, t, c) = (s[0], s[1], s[2]);
            accumulate(nodes, grads, *a, |d| {
                for bi in 0..b {
                    for ti in 0..t {
                        let dst = (bi * t + ti) * c;
                        add_into(&mut d[dst..dst + c], g[bi * c..(bi + 1) * c].iter().map(|v| v / t as f64));
                    }
                }
            });
        }
        Op::Gru(tape) => tape.backward(nodes, node, g, grads),
    }
}

pub(crate) fn accumulate_into(nodes: &[Node], grads: &mut [Option<Vec<f64>>], v: Var, contribution: impl FnOnce(&mut [f64])) {
    accumulate(nodes, grads, v, contribution)
}

impl Var {
    pub(crate) fn index(self) -> usize {
        self.0
    }
}

/// Gradients of one backward sweep, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// `None` when `v` does not influence the loss through any
    /// gradient-carrying path.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}
