use std::collections::HashMap;

use rand::Rng as _;

use super::kernels::{self, gemm};
use super::Tensor;
use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Forward mode. Training carries the generator that stochastic ops draw from.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut Rng),
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddBias(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Gelu(Var),
    Exp(Var),
    Concat {
        a: Var,
        b: Var,
        axis: usize,
    },
    Slice {
        a: Var,
        axis: usize,
        start: usize,
    },
    GatherRows {
        a: Var,
        idx: Vec<usize>,
    },
    Dropout {
        a: Var,
        mask: Vec<f64>,
    },
    RdftRows(Var),
    Sum(Var),
    Mean(Var),
    SumAbs(Var),
    SumSqCols {
        a: Var,
        weights: Option<Vec<f64>>,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run gradient tape.
///
/// Nodes are appended in evaluation order, so the recording order is a
/// topological order and `backward` walks it once in reverse. Model
/// parameters are bound lazily through [`Tape::param`]; their gradients can
/// be read back by [`ParamId`] after `backward`.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    bound: HashMap<usize, Var>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    /// Leaf node; `requires_grad` leaves always end up with a gradient after
    /// `backward`.
    pub fn leaf(&mut self, t: Tensor, requires_grad: bool) -> Var {
        self.push(t, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t, false)
    }

    /// Bind a stored parameter as a gradient-tracking leaf (once per tape).
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id.index()) {
            return v;
        }
        let v = self.leaf(store.value(id).clone(), true);
        self.bound.insert(id.index(), v);
        v
    }

    /// Gradient of a bound parameter; `None` when it was not used in the
    /// forward pass or backward has not run.
    pub fn param_grad(&self, id: ParamId) -> Option<&[f64]> {
        let v = self.bound.get(&id.index())?;
        self.grads.get(v.0)?.as_deref()
    }

    /// Add this tape's parameter gradients into per-parameter accumulators
    /// indexed like the store.
    pub fn accumulate_param_grads(&self, acc: &mut [Vec<f64>]) {
        for (&pid, v) in &self.bound {
            if let Some(Some(g)) = self.grads.get(v.0) {
                for (a, b) in acc[pid].iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
    }

    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor::new(self.shape(v), g.clone()).expect("grad shape"))
    }

    // ── ops ──────────────────────────────────────────────────────────

    /// Matrix product. The left operand may be rank 3, in which case its
    /// leading axes are treated as extra rows.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sb.len() != 2 || sa.len() < 2 || sa[sa.len() - 1] != sb[0] {
            return Err(Error::shape("matmul", &sa, &sb));
        }
        let (m, k) = self.value(a).rows_cols();
        let n = sb[1];
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            false,
            self.value(b).data(),
            false,
            &mut out,
            false,
        );
        let mut shape = sa.clone();
        *shape.last_mut().unwrap() = n;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(&shape, out)?, Op::MatMul(a, b), rg))
    }

    fn binary(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::shape(name, ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, "add", |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, "sub", |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, "mul", |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a).map(|v| v * c);
        let rg = self.rg(a);
        self.push(t, Op::Scale(a, c), rg)
    }

    /// `x + b` with `b` (rank 1) broadcast over the last axis.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(b));
        let (_, n) = tx.rows_cols();
        if tb.rank() != 1 || tb.len() != n {
            return Err(Error::shape("add_bias", tx.shape(), tb.shape()));
        }
        let mut out = tx.data().to_vec();
        for row in out.chunks_exact_mut(n) {
            for (o, &bv) in row.iter_mut().zip(tb.data()) {
                *o += bv;
            }
        }
        let t = Tensor::new(tx.shape(), out)?;
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(t, Op::AddBias(x, b), rg))
    }

    /// Swap the last two axes (rank 2 or 3).
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let s = ta.shape().to_vec();
        if s.len() < 2 {
            return Err(Error::invalid("transpose needs rank ≥ 2"));
        }
        let (m, n) = (s[s.len() - 2], s[s.len() - 1]);
        let batch = ta.len() / (m * n);
        let mut out = vec![0.0; ta.len()];
        for bi in 0..batch {
            let off = bi * m * n;
            kernels::transpose(&ta.data()[off..off + m * n], m, n, &mut out[off..off + m * n]);
        }
        let mut shape = s.clone();
        let r = shape.len();
        shape.swap(r - 2, r - 1);
        let rg = self.rg(a);
        Ok(self.push(Tensor::new(&shape, out)?, Op::Transpose(a), rg))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).clone().reshape(shape)?;
        let rg = self.rg(a);
        Ok(self.push(t, Op::Reshape(a), rg))
    }

    /// Softmax over the last axis.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (_, n) = ta.rows_cols();
        let mut out = vec![0.0; ta.len()];
        kernels::softmax_rows(ta.data(), n, &mut out);
        let t = Tensor::new(ta.shape(), out).expect("same shape");
        let rg = self.rg(a);
        self.push(t, Op::Softmax(a), rg)
    }

    /// Layer normalization over the last axis with affine gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        if eps <= 0.0 {
            return Err(Error::invalid("layer_norm eps must be positive"));
        }
        let tx = self.value(x);
        let (m, n) = tx.rows_cols();
        for p in [gain, bias] {
            let tp = self.value(p);
            if tp.rank() != 1 || tp.len() != n {
                return Err(Error::shape("layer_norm", tx.shape(), tp.shape()));
            }
        }
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let mut xhat = vec![0.0; m * n];
        let mut inv_std = vec![0.0; m];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = tx.row(i);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[i] = is;
            for j in 0..n {
                let h = (row[j] - mean) * is;
                xhat[i * n + j] = h;
                out[i * n + j] = h * g[j] + b[j];
            }
        }
        let t = Tensor::new(tx.shape(), out)?;
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            t,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let t = self.value(a).map(kernels::gelu);
        let rg = self.rg(a);
        self.push(t, Op::Gelu(a), rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let t = self.value(a).map(f64::exp);
        let rg = self.rg(a);
        self.push(t, Op::Exp(a), rg)
    }

    /// Concatenate two rank-2 tensors along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != 2 || sb.len() != 2 || axis > 1 || sa[1 - axis] != sb[1 - axis] {
            return Err(Error::shape("concat", sa, sb));
        }
        let t = if axis == 0 {
            let mut d = ta.data().to_vec();
            d.extend_from_slice(tb.data());
            Tensor::new(&[sa[0] + sb[0], sa[1]], d)?
        } else {
            let mut d = Vec::with_capacity(ta.len() + tb.len());
            for i in 0..sa[0] {
                d.extend_from_slice(ta.row(i));
                d.extend_from_slice(tb.row(i));
            }
            Tensor::new(&[sa[0], sa[1] + sb[1]], d)?
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Concat { a, b, axis }, rg))
    }

    /// `len` consecutive rows (axis 0) or columns (axis 1) starting at `start`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let ta = self.value(a);
        let s = ta.shape();
        if s.len() != 2 || axis > 1 {
            return Err(Error::OutOfBounds {
                op: "slice",
                detail: format!("axis {axis} of shape {s:?}"),
            });
        }
        if len == 0 || start + len > s[axis] {
            return Err(Error::OutOfBounds {
                op: "slice",
                detail: format!("range {start}..{} on axis {axis} of {s:?}", start + len),
            });
        }
        let t = if axis == 0 {
            Tensor::new(&[len, s[1]], ta.data()[start * s[1]..(start + len) * s[1]].to_vec())?
        } else {
            let mut d = Vec::with_capacity(s[0] * len);
            for i in 0..s[0] {
                d.extend_from_slice(&ta.row(i)[start..start + len]);
            }
            Tensor::new(&[s[0], len], d)?
        };
        let rg = self.rg(a);
        Ok(self.push(t, Op::Slice { a, axis, start }, rg))
    }

    /// Rows of a rank-2 tensor picked by index; repeats are allowed.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let t = self.value(a).select_rows(idx)?;
        let rg = self.rg(a);
        Ok(self.push(
            t,
            Op::GatherRows {
                a,
                idx: idx.to_vec(),
            },
            rg,
        ))
    }

    /// Inverted dropout; the identity in evaluation mode or at rate 0.
    pub fn dropout(&mut self, a: Var, rate: f64, mode: &mut Mode<'_>) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
        }
        let rng = match mode {
            Mode::Train(rng) if rate > 0.0 => rng,
            _ => return Ok(a),
        };
        let keep = 1.0 / (1.0 - rate);
        let n = self.value(a).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let ta = self.value(a);
        let d = ta.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let t = Tensor::new(ta.shape(), d)?;
        let rg = self.rg(a);
        Ok(self.push(t, Op::Dropout { a, mask }, rg))
    }

    /// Real DFT of every row: M×T → M×2K with K = ⌊T/2⌋+1; columns
    /// `0..K` hold real parts and `K..2K` imaginary parts.
    pub fn rdft_rows(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        if ta.rank() != 2 {
            return Err(Error::invalid("rdft_rows needs a rank-2 tensor"));
        }
        let (m, t) = ta.rows_cols();
        let k = kernels::rdft_bins(t);
        let mut out = vec![0.0; m * 2 * k];
        for i in 0..m {
            let spec = kernels::rdft(ta.row(i));
            let o = &mut out[i * 2 * k..(i + 1) * 2 * k];
            for (j, c) in spec.iter().enumerate() {
                o[j] = c.re;
                o[k + j] = c.im;
            }
        }
        let t = Tensor::new(&[m, 2 * k], out)?;
        let rg = self.rg(a);
        Ok(self.push(t, Op::RdftRows(a), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let s = ta.data().iter().sum::<f64>() / ta.len() as f64;
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Mean(a), rg)
    }

    pub fn sum_abs(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().map(|v| v.abs()).sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::SumAbs(a), rg)
    }

    pub fn sum_sq(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().map(|v| v * v).sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::SumSqCols { a, weights: None }, rg)
    }

    /// `Σ_ij w_j · a_ij²` with one weight per column.
    pub fn weighted_sum_sq_cols(&mut self, a: Var, weights: &[f64]) -> Result<Var> {
        let ta = self.value(a);
        let (_, n) = ta.rows_cols();
        if weights.len() != n {
            return Err(Error::shape("weighted_sum_sq_cols", ta.shape(), &[weights.len()]));
        }
        let s = ta
            .data()
            .chunks_exact(n)
            .map(|r| r.iter().zip(weights).map(|(v, w)| w * v * v).sum::<f64>())
            .sum();
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::scalar(s),
            Op::SumSqCols {
                a,
                weights: Some(weights.to_vec()),
            },
            rg,
        ))
    }

    /// Mean softmax cross-entropy of N×K logits against class labels.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let tl = self.value(logits);
        if tl.rank() != 2 || tl.shape()[0] != labels.len() {
            return Err(Error::shape("cross_entropy", tl.shape(), &[labels.len()]));
        }
        let (n, k) = tl.rows_cols();
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::invalid(format!("label {bad} with {k} classes")));
        }
        let mut probs = vec![0.0; n * k];
        kernels::softmax_rows(tl.data(), k, &mut probs);
        let loss = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| -probs[i * k + y].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / n as f64;
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    // ── backward ─────────────────────────────────────────────────────

    /// Reverse pass from a scalar output. Each node is visited once, in
    /// reverse recording order.
    pub fn backward(&mut self, out: Var) -> Result<()> {
        if self.value(out).len() != 1 {
            return Err(Error::invalid("backward needs a scalar output"));
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[out.0] = Some(vec![1.0]);
        for i in (0..=out.0).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            if !self.nodes[i].requires_grad {
                continue;
            }
            backward_node(&self.nodes, &mut self.grads, i, &g);
            self.grads[i] = Some(g);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && matches!(node.op, Op::Leaf) && self.grads[i].is_none() {
                self.grads[i] = Some(vec![0.0; node.value.len()]);
            }
        }
        Ok(())
    }
}

fn slot<'g>(nodes: &[Node], grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut [f64]> {
    let node = &nodes[v.0];
    if !node.requires_grad {
        return None;
    }
    let n = node.value.len();
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(p, q)| *p += q);
}

/// Apply the backward rule of node `i` given its output gradient `g`.
fn backward_node(nodes: &[Node], grads: &mut [Option<Vec<f64>>], i: usize, g: &[f64]) {
    let val = |v: &Var| nodes[v.0].value.data();
    let shape = |v: &Var| nodes[v.0].value.shape();
    match &nodes[i].op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k) = nodes[a.0].value.rows_cols();
            let n = shape(b)[1];
            if let Some(ga) = slot(nodes, grads, *a) {
                gemm(m, n, k, g, false, val(b), true, ga, true);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                gemm(k, m, n, val(a), true, g, false, gb, true);
            }
        }
        Op::Add(a, b) => {
            for v in [a, b] {
                if let Some(gv) = slot(nodes, grads, *v) {
                    add_into(gv, g);
                }
            }
        }
        Op::Sub(a, b) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                add_into(ga, g);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                gb.iter_mut().zip(g).for_each(|(x, y)| *x -= y);
            }
        }
        Op::Mul(a, b) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((p, q), w) in ga.iter_mut().zip(g).zip(val(b)) {
                    *p += q * w;
                }
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                for ((p, q), w) in gb.iter_mut().zip(g).zip(val(a)) {
                    *p += q * w;
                }
            }
        }
        Op::Scale(a, c) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().zip(g).for_each(|(x, y)| *x += c * y);
            }
        }
        Op::AddBias(x, b) => {
            if let Some(gx) = slot(nodes, grads, *x) {
                add_into(gx, g);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                let n = gb.len();
                for row in g.chunks_exact(n) {
                    add_into(gb, row);
                }
            }
        }
        Op::Transpose(a) => {
            let s = nodes[i].value.shape();
            let (m, n) = (s[s.len() - 2], s[s.len() - 1]);
            if let Some(ga) = slot(nodes, grads, *a) {
                let mut tmp = vec![0.0; m * n];
                for (gs, dst) in g.chunks_exact(m * n).zip(ga.chunks_exact_mut(m * n)) {
                    kernels::transpose(gs, m, n, &mut tmp);
                    add_into(dst, &tmp);
                }
            }
        }
        Op::Reshape(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                add_into(ga, g);
            }
        }
        Op::Softmax(a) => {
            let y = nodes[i].value.data();
            let (_, n) = nodes[i].value.rows_cols();
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((yr, gr), dr) in y
                    .chunks_exact(n)
                    .zip(g.chunks_exact(n))
                    .zip(ga.chunks_exact_mut(n))
                {
                    let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for j in 0..n {
                        dr[j] += yr[j] * (gr[j] - dot);
                    }
                }
            }
        }
        Op::LayerNorm {
            x,
            gain,
            bias,
            xhat,
            inv_std,
        } => {
            let n = shape(gain)[0];
            if let Some(gg) = slot(nodes, grads, *gain) {
                for (gr, hr) in g.chunks_exact(n).zip(xhat.chunks_exact(n)) {
                    for j in 0..n {
                        gg[j] += gr[j] * hr[j];
                    }
                }
            }
            if let Some(gb) = slot(nodes, grads, *bias) {
                for gr in g.chunks_exact(n) {
                    add_into(gb, gr);
                }
            }
            let gain_v = val(gain);
            if let Some(gx) = slot(nodes, grads, *x) {
                let nf = n as f64;
                for (r, ((gr, hr), dr)) in g
                    .chunks_exact(n)
                    .zip(xhat.chunks_exact(n))
                    .zip(gx.chunks_exact_mut(n))
                    .enumerate()
                {
                    let mut s1 = 0.0;
                    let mut s2 = 0.0;
                    for j in 0..n {
                        let dh = gr[j] * gain_v[j];
                        s1 += dh;
                        s2 += dh * hr[j];
                    }
                    let is = inv_std[r];
                    for j in 0..n {
                        let dh = gr[j] * gain_v[j];
                        dr[j] += is / nf * (nf * dh - s1 - hr[j] * s2);
                    }
                }
            }
        }
        Op::Gelu(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((p, q), x) in ga.iter_mut().zip(g).zip(val(a)) {
                    *p += q * kernels::gelu_grad(*x);
                }
            }
        }
        Op::Exp(a) => {
            let y = nodes[i].value.data();
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((p, q), e) in ga.iter_mut().zip(g).zip(y) {
                    *p += q * e;
                }
            }
        }
        Op::Concat { a, b, axis } => {
            let (sa, sb) = (shape(a), shape(b));
            if *axis == 0 {
                let na = sa[0] * sa[1];
                if let Some(ga) = slot(nodes, grads, *a) {
                    add_into(ga, &g[..na]);
                }
                if let Some(gb) = slot(nodes, grads, *b) {
                    add_into(gb, &g[na..]);
                }
            } else {
                let (wa, wb) = (sa[1], sb[1]);
                let w = wa + wb;
                if let Some(ga) = slot(nodes, grads, *a) {
                    for (dst, src) in ga.chunks_exact_mut(wa).zip(g.chunks_exact(w)) {
                        add_into(dst, &src[..wa]);
                    }
                }
                if let Some(gb) = slot(nodes, grads, *b) {
                    for (dst, src) in gb.chunks_exact_mut(wb).zip(g.chunks_exact(w)) {
                        add_into(dst, &src[wa..]);
                    }
                }
            }
        }
        Op::Slice { a, axis, start } => {
            let wa = shape(a)[1];
            let wo = nodes[i].value.shape()[1];
            if let Some(ga) = slot(nodes, grads, *a) {
                if *axis == 0 {
                    let off = start * wa;
                    add_into(&mut ga[off..off + g.len()], g);
                } else {
                    for (dst, src) in ga.chunks_exact_mut(wa).zip(g.chunks_exact(wo)) {
                        add_into(&mut dst[*start..start + wo], src);
                    }
                }
            }
        }
        Op::GatherRows { a, idx } => {
            let n = shape(a)[1];
            if let Some(ga) = slot(nodes, grads, *a) {
                for (src, &row) in g.chunks_exact(n).zip(idx) {
                    add_into(&mut ga[row * n..(row + 1) * n], src);
                }
            }
        }
        Op::Dropout { a, mask } => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((p, q), m) in ga.iter_mut().zip(g).zip(mask) {
                    *p += q * m;
                }
            }
        }
        Op::RdftRows(a) => {
            let (m, t) = nodes[a.0].value.rows_cols();
            let k = kernels::rdft_bins(t);
            if let Some(ga) = slot(nodes, grads, *a) {
                for r in 0..m {
                    let gr = &g[r * 2 * k..(r + 1) * 2 * k];
                    kernels::rdft_adjoint(&gr[..k], &gr[k..], t, &mut ga[r * t..(r + 1) * t]);
                }
            }
        }
        Op::Sum(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().for_each(|p| *p += g[0]);
            }
        }
        Op::Mean(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                let c = g[0] / ga.len() as f64;
                ga.iter_mut().for_each(|p| *p += c);
            }
        }
        Op::SumAbs(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for (p, &x) in ga.iter_mut().zip(val(a)) {
                    // zero subgradient at exact ties
                    let s = if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    *p += g[0] * s;
                }
            }
        }
        Op::SumSqCols { a, weights } => {
            let n = *shape(a).last().unwrap();
            if let Some(ga) = slot(nodes, grads, *a) {
                for (j, (p, &x)) in ga.iter_mut().zip(val(a)).enumerate() {
                    let w = weights.as_ref().map_or(1.0, |w| w[j % n]);
                    *p += g[0] * 2.0 * w * x;
                }
            }
        }
        Op::CrossEntropy {
            logits,
            labels,
            probs,
        } => {
            let (nr, k) = nodes[logits.0].value.rows_cols();
            if let Some(gl) = slot(nodes, grads, *logits) {
                let c = g[0] / nr as f64;
                for (r, &y) in labels.iter().enumerate() {
                    for j in 0..k {
                        let onehot = if y == j { 1.0 } else { 0.0 };
                        gl[r * k + j] += c * (probs[r * k + j] - onehot);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows)
    }

    #[test]
    fn matmul_identity_and_projector() {
        let mut t = Tape::new();
        let i2 = t.constant(Tensor::eye(2));
        let a = t.constant(m(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let p = t.matmul(i2, a).unwrap();
        assert_eq!(t.value(p), t.value(a));
        let proj = t.constant(m(&[vec![1.0, 0.0], vec![0.0, 0.0]]));
        let b = t.constant(m(&[vec![5.0, 6.0], vec![7.0, 8.0]]));
        let q = t.matmul(proj, b).unwrap();
        assert_eq!(t.value(q).data(), &[5.0, 6.0, 0.0, 0.0]);
    }

    #[test]
    fn matmul_shape_error_reports_both_shapes() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(&[2, 3]));
        let b = t.constant(Tensor::zeros(&[2, 3]));
        match t.matmul(a, b) {
            Err(Error::Shape { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 3]);
            }
            other => panic!("expected shape error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn softmax_uniform_and_overflow_safe() {
        let mut t = Tape::new();
        let a = t.constant(m(&[vec![0.0, 0.0, 0.0], vec![1000.0, 0.0, -1000.0]]));
        let s = t.softmax_rows(a);
        let v = t.value(s);
        for j in 0..3 {
            assert!((v.at2(0, j) - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((v.at2(1, 0) - 1.0).abs() < 1e-12);
        assert!(v.at2(1, 1) < 1e-300 + 1e-12);
        assert!(v.data().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn layer_norm_constant_row_maps_to_zero() {
        let mut t = Tape::new();
        let x = t.constant(m(&[vec![4.0, 4.0, 4.0], vec![1.0, 3.0, 5.0]]));
        let g = t.constant(Tensor::full(&[3], 1.0));
        let b = t.constant(Tensor::zeros(&[3]));
        let y = t.layer_norm(x, g, b, 1e-5).unwrap();
        assert!(t.value(y).row(0).iter().all(|&v| v == 0.0));
        let x2 = t.constant(m(&[vec![1.0, 3.0]]));
        let g2 = t.constant(Tensor::full(&[2], 1.0));
        let b2 = t.constant(Tensor::zeros(&[2]));
        let y2 = t.layer_norm(x2, g2, b2, 1e-5).unwrap();
        let r = t.value(y2).row(0).to_vec();
        assert!((r[0] + 1.0).abs() < 1e-3 && (r[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn linear_pieces_behave() {
        let mut t = Tape::new();
        let x = t.constant(m(&[vec![1.0, -2.0], vec![0.5, 3.0]]));
        let w = t.constant(Tensor::eye(2));
        let b0 = t.constant(Tensor::zeros(&[2]));
        let y = t.matmul(x, w).unwrap();
        let y = t.add_bias(y, b0).unwrap();
        assert_eq!(t.value(y), t.value(x));
        let z = t.constant(Tensor::zeros(&[2, 2]));
        let b = t.constant(Tensor::new(&[2], vec![0.25, -1.0]).unwrap());
        let zy = t.matmul(z, w).unwrap();
        let zy = t.add_bias(zy, b).unwrap();
        assert_eq!(t.value(zy).row(1), &[0.25, -1.0]);
    }

    #[test]
    fn concat_and_slice() {
        let mut t = Tape::new();
        let a = t.constant(m(&[vec![1.0]]));
        let b = t.constant(m(&[vec![2.0]]));
        let c = t.concat(a, b, 0).unwrap();
        assert_eq!(t.value(c).shape(), &[2, 1]);
        assert_eq!(t.value(c).data(), &[1.0, 2.0]);
        assert!(t.slice(c, 0, 1, 2).is_err());
        assert!(t.slice(c, 2, 0, 1).is_err());
        assert!(t.concat(a, c, 1).is_err());
    }

    #[test]
    fn dropout_identity_cases_and_rate_check() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::full(&[4, 4], 2.0));
        let mut rng = crate::rng::seeded(1);
        let mut train = Mode::Train(&mut rng);
        assert_eq!(t.dropout(a, 0.0, &mut train).unwrap(), a);
        assert_eq!(t.dropout(a, 0.9, &mut Mode::Eval).unwrap(), a);
        assert!(t.dropout(a, 1.0, &mut train).is_err());
        assert!(t.dropout(a, -0.1, &mut Mode::Eval).is_err());
    }

    #[test]
    fn dropout_keep_fraction() {
        let mut t = Tape::new();
        let n = 100_000;
        let a = t.constant(Tensor::full(&[n], 1.0));
        let mut rng = crate::rng::seeded(7);
        let rate = 0.3;
        let d = t.dropout(a, rate, &mut Mode::Train(&mut rng)).unwrap();
        let kept = t.value(d).data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        assert!((kept - (1.0 - rate)).abs() < 0.01, "kept {kept}");
        let survivor = t.value(d).data().iter().find(|&&v| v != 0.0).copied().unwrap();
        assert!((survivor - 1.0 / 0.7).abs() < 1e-12);
    }

    #[test]
    fn backward_populates_every_grad_leaf() {
        let mut t = Tape::new();
        let used = t.leaf(Tensor::full(&[2], 3.0), true);
        let unused = t.leaf(Tensor::full(&[3], 1.0), true);
        let s = t.sum_sq(used);
        t.backward(s).unwrap();
        assert_eq!(t.grad(used).unwrap().data(), &[6.0, 6.0]);
        assert_eq!(t.grad(unused).unwrap().data(), &[0.0; 3]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::zeros(&[2]), true);
        assert!(t.backward(a).is_err());
    }
}
