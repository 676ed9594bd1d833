//! Reverse-mode differentiation over dense arrays.
//!
//! A [`Tape`] is rebuilt for every forward pass. Leaves are added with
//! [`Tape::param`] (gradient tracked) or [`Tape::constant`]; every
//! primitive appends one node whose inputs already sit on the tape, so
//! the node list is a topological order and [`Tape::backward`] is a
//! single reverse sweep.

use std::sync::atomic::{AtomicU64, Ordering};

use super::array::{gemm_acc, gemm_at_acc, gemm_bt_acc, Array};
use crate::error::{Error, Result};

/// Slope of the negative half of `leaky_relu`.
pub const LEAKY_SLOPE: f64 = 0.2;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Sigmoid,
    SoftmaxRows,
    Tanh,
}

/// Handle to a node on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Affine {
        x: usize,
        w: usize,
        b: usize,
    },
    Conv1d {
        x: usize,
        k: usize,
        b: usize,
        stride: usize,
        padding: usize,
    },
    Act {
        x: usize,
        kind: Activation,
    },
    Add {
        a: usize,
        b: usize,
    },
    Mul {
        a: usize,
        b: usize,
    },
    ScaleShift {
        x: usize,
        scale: f64,
    },
    ConcatCols {
        parts: Vec<usize>,
    },
    SliceCols {
        x: usize,
        start: usize,
    },
    Reshape {
        x: usize,
    },
    MeanTime {
        x: usize,
    },
    Sum {
        x: usize,
    },
    Mean {
        x: usize,
    },
    LogClamped {
        x: usize,
        lo: f64,
        hi: f64,
    },
    Gather {
        x: usize,
        idx: Vec<usize>,
    },
    Select {
        keep: usize,
        fill: usize,
        take_fill: Vec<bool>,
    },
}

#[derive(Debug)]
struct Node {
    value: Array,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by one backward sweep, indexed by node.
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Array>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; zeros when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Array {
        assert_eq!(v.tape, self.tape, "variable from another tape");
        match &self.grads[v.idx] {
            Some(g) => g.clone(),
            None => Array::zeros(&self.shapes[v.idx]),
        }
    }

    pub fn wrt(&self, vars: &[Var]) -> Vec<Array> {
        vars.iter().map(|&v| self.get(v)).collect()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(Error::UnknownNode(v.idx));
        }
        Ok(v.idx)
    }

    fn push(&mut self, value: Array, op: Op, inputs: &[usize]) -> Var {
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        self.push_raw(value, op, requires_grad)
    }

    fn push_raw(&mut self, value: Array, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    /// Leaf whose gradient is tracked.
    pub fn param(&mut self, value: Array) -> Var {
        self.push_raw(value, Op::Leaf, true)
    }

    /// Leaf treated as a fixed input.
    pub fn constant(&mut self, value: Array) -> Var {
        self.push_raw(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Array {
        assert_eq!(v.tape, self.id, "variable from another tape");
        &self.nodes[v.idx].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.idx].requires_grad
    }

    /// `x[n×d_in]·W[d_in×d_out] + b[d_out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xi, wi, bi) = (self.check(x)?, self.check(w)?, self.check(b)?);
        let out = affine_forward(&self.nodes[xi].value, &self.nodes[wi].value, &self.nodes[bi].value)?;
        Ok(self.push(out, Op::Affine { x: xi, w: wi, b: bi }, &[xi, wi, bi]))
    }

    /// Cross-correlation of `x[n×c_in×m]` with `k[c_out×c_in×f]`.
    pub fn conv1d(&mut self, x: Var, k: Var, b: Var, stride: usize, padding: usize) -> Result<Var> {
        let (xi, ki, bi) = (self.check(x)?, self.check(k)?, self.check(b)?);
        let out = conv1d_forward(
            &self.nodes[xi].value,
            &self.nodes[ki].value,
            &self.nodes[bi].value,
            stride,
            padding,
        )?;
        Ok(self.push(
            out,
            Op::Conv1d {
                x: xi,
                k: ki,
                b: bi,
                stride,
                padding,
            },
            &[xi, ki, bi],
        ))
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var> {
        let xi = self.check(x)?;
        let out = activate(&self.nodes[xi].value, kind)?;
        Ok(self.push(out, Op::Act { x: xi, kind }, &[xi]))
    }

    fn same_shape(&self, op: &'static str, a: usize, b: usize) -> Result<()> {
        let (sa, sb) = (self.nodes[a].value.shape(), self.nodes[b].value.shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.check(a)?, self.check(b)?);
        self.same_shape("add", ai, bi)?;
        let out = self.nodes[ai].value.zip_map(&self.nodes[bi].value, |x, y| x + y);
        Ok(self.push(out, Op::Add { a: ai, b: bi }, &[ai, bi]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.check(a)?, self.check(b)?);
        self.same_shape("mul", ai, bi)?;
        let out = self.nodes[ai].value.zip_map(&self.nodes[bi].value, |x, y| x * y);
        Ok(self.push(out, Op::Mul { a: ai, b: bi }, &[ai, bi]))
    }

    /// `scale·x + shift`.
    pub fn scale_shift(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var> {
        let xi = self.check(x)?;
        let out = self.nodes[xi].value.map(|v| scale * v + shift);
        Ok(self.push(out, Op::ScaleShift { x: xi, scale }, &[xi]))
    }

    /// Concatenates 2-D arrays with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let idx = parts.iter().map(|&p| self.check(p)).collect::<Result<Vec<_>>>()?;
        let first = idx.first().ok_or_else(|| Error::shape("concat_cols", "no inputs"))?;
        let rows = self.nodes[*first].value.shape()[0];
        let mut widths = Vec::with_capacity(idx.len());
        for &i in &idx {
            let s = self.nodes[i].value.shape();
            if s.len() != 2 || s[0] != rows {
                return Err(Error::shape(
                    "concat_cols",
                    format!("part of shape {s:?} with {rows} rows expected"),
                ));
            }
            widths.push(s[1]);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &i in &idx {
                data.extend_from_slice(self.nodes[i].value.row(r));
            }
        }
        let out = Array::new(vec![rows, total], data)?;
        Ok(self.push(out, Op::ConcatCols { parts: idx.clone() }, &idx))
    }

    /// Columns `start..end` of a 2-D array.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let xi = self.check(x)?;
        let s = self.nodes[xi].value.shape();
        if s.len() != 2 || start >= end || end > s[1] {
            return Err(Error::shape("slice_cols", format!("{start}..{end} of {s:?}")));
        }
        let rows = s[0];
        let data = self.nodes[xi]
            .value
            .rows()
            .flat_map(|r| r[start..end].iter().copied())
            .collect();
        let out = Array::new(vec![rows, end - start], data)?;
        Ok(self.push(out, Op::SliceCols { x: xi, start }, &[xi]))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let xi = self.check(x)?;
        let out = self.nodes[xi].value.clone().reshape(shape)?;
        Ok(self.push(out, Op::Reshape { x: xi }, &[xi]))
    }

    /// Average over the last axis of `n×c×m`, giving `n×c`.
    pub fn mean_time(&mut self, x: Var) -> Result<Var> {
        let xi = self.check(x)?;
        let s = self.nodes[xi].value.shape().to_vec();
        if s.len() != 3 {
            return Err(Error::shape("mean_time", format!("expected 3-D, got {s:?}")));
        }
        let m = s[2] as f64;
        let data = self.nodes[xi]
            .value
            .data()
            .chunks(s[2])
            .map(|c| c.iter().sum::<f64>() / m)
            .collect();
        let out = Array::new(vec![s[0], s[1]], data)?;
        Ok(self.push(out, Op::MeanTime { x: xi }, &[xi]))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let xi = self.check(x)?;
        let out = Array::scalar(self.nodes[xi].value.sum());
        Ok(self.push(out, Op::Sum { x: xi }, &[xi]))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let xi = self.check(x)?;
        let v = &self.nodes[xi].value;
        let out = Array::scalar(v.sum() / v.len() as f64);
        Ok(self.push(out, Op::Mean { x: xi }, &[xi]))
    }

    /// `ln(clamp(x, lo, hi))`; zero gradient where the clamp is active.
    pub fn log_clamped(&mut self, x: Var, lo: f64, hi: f64) -> Result<Var> {
        let xi = self.check(x)?;
        let out = self.nodes[xi].value.map(|v| v.clamp(lo, hi).ln());
        Ok(self.push(out, Op::LogClamped { x: xi, lo, hi }, &[xi]))
    }

    /// Picks `x[i, idx[i]]` from a 2-D array, giving a length-`n` vector.
    pub fn gather(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let xi = self.check(x)?;
        let s = self.nodes[xi].value.shape();
        if s.len() != 2 || s[0] != idx.len() || idx.iter().any(|&j| j >= s[1]) {
            return Err(Error::shape("gather", format!("{} indices into {s:?}", idx.len())));
        }
        let v = &self.nodes[xi].value;
        let data = idx.iter().enumerate().map(|(i, &j)| v.row(i)[j]).collect();
        let out = Array::from_vec(data);
        Ok(self.push(
            out,
            Op::Gather {
                x: xi,
                idx: idx.to_vec(),
            },
            &[xi],
        ))
    }

    /// Elementwise `fill` where `indicator` is nonzero, `keep` elsewhere.
    /// Equals `keep ⊙ (1 − I) + fill ⊙ I` for binary `I`, but copies values
    /// so kept entries are bit-identical.
    pub fn select(&mut self, indicator: &Array, keep: Var, fill: Var) -> Result<Var> {
        let (ki, fi) = (self.check(keep)?, self.check(fill)?);
        self.same_shape("select", ki, fi)?;
        if indicator.shape() != self.nodes[ki].value.shape() {
            return Err(Error::shape(
                "select",
                format!(
                    "indicator {:?} vs {:?}",
                    indicator.shape(),
                    self.nodes[ki].value.shape()
                ),
            ));
        }
        let take_fill: Vec<bool> = indicator.data().iter().map(|&v| v != 0.0).collect();
        let data = take_fill
            .iter()
            .zip(self.nodes[ki].value.data().iter().zip(self.nodes[fi].value.data()))
            .map(|(&t, (&k, &f))| if t { f } else { k })
            .collect();
        let out = Array::new(indicator.shape().to_vec(), data)?;
        Ok(self.push(
            out,
            Op::Select {
                keep: ki,
                fill: fi,
                take_fill,
            },
            &[ki, fi],
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let li = self.check(loss)?;
        if self.nodes[li].value.len() != 1 {
            return Err(Error::NotScalarLoss(li));
        }
        let mut grads: Vec<Option<Array>> = vec![None; li + 1];
        grads[li] = Some(Array::full(self.nodes[li].value.shape(), 1.0));

        for i in (0..=li).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        Ok(Gradients {
            tape: self.id,
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn wants(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    fn propagate(&self, i: usize, g: &Array, grads: &mut [Option<Array>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                let xv = &self.nodes[*x].value;
                let wv = &self.nodes[*w].value;
                let (n, din, dout) = (xv.shape()[0], xv.shape()[1], wv.shape()[1]);
                if self.wants(*x) {
                    let gx = slot(grads, *x, xv.shape());
                    gemm_bt_acc(g.data(), wv.data(), gx.data_mut(), n, din, dout);
                }
                if self.wants(*w) {
                    let gw = slot(grads, *w, wv.shape());
                    gemm_at_acc(xv.data(), g.data(), gw.data_mut(), n, din, dout);
                }
                if self.wants(*b) {
                    let gb = slot(grads, *b, self.nodes[*b].value.shape());
                    for row in g.rows() {
                        for (acc, v) in gb.data_mut().iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                }
            }
            Op::Conv1d {
                x,
                k,
                b,
                stride,
                padding,
            } => {
                let xv = &self.nodes[*x].value;
                let kv = &self.nodes[*k].value;
                let geo = ConvGeometry::of(xv.shape(), kv.shape(), *stride, *padding);
                let grows = geo.grad_rows(g.data());
                if self.wants(*x) {
                    let kt = geo.kernel_t(kv.data());
                    let mut dcols = vec![0.0; geo.rows() * geo.patch()];
                    gemm_bt_acc(&grows, &kt, &mut dcols, geo.rows(), geo.patch(), geo.c_out);
                    let gx = slot(grads, *x, xv.shape());
                    geo.col2im(&dcols, gx.data_mut());
                }
                if self.wants(*k) {
                    let cols = geo.im2col(xv.data());
                    let mut dkt = vec![0.0; geo.patch() * geo.c_out];
                    gemm_at_acc(&cols, &grows, &mut dkt, geo.rows(), geo.patch(), geo.c_out);
                    let gk = slot(grads, *k, kv.shape());
                    let p = geo.patch();
                    for o in 0..geo.c_out {
                        for q in 0..p {
                            gk.data_mut()[o * p + q] += dkt[q * geo.c_out + o];
                        }
                    }
                }
                if self.wants(*b) {
                    let gb = slot(grads, *b, self.nodes[*b].value.shape());
                    for (j, chunk) in g.data().chunks(geo.m_out).enumerate() {
                        gb.data_mut()[j % geo.c_out] += chunk.iter().sum::<f64>();
                    }
                }
            }
            Op::Act { x, kind } => {
                if !self.wants(*x) {
                    return;
                }
                let xv = &self.nodes[*x].value;
                let y = &node.value;
                let local = match kind {
                    Activation::Relu => xv.zip_map(g, |a, gi| if a > 0.0 { gi } else { 0.0 }),
                    Activation::LeakyRelu => xv.zip_map(g, |a, gi| if a > 0.0 { gi } else { LEAKY_SLOPE * gi }),
                    Activation::Sigmoid => y.zip_map(g, |s, gi| gi * s * (1.0 - s)),
                    Activation::Tanh => y.zip_map(g, |t, gi| gi * (1.0 - t * t)),
                    Activation::SoftmaxRows => {
                        let cols = y.shape()[1];
                        let mut out = Vec::with_capacity(y.len());
                        for (yr, gr) in y.data().chunks(cols).zip(g.data().chunks(cols)) {
                            let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                            out.extend(yr.iter().zip(gr).map(|(s, gi)| s * (gi - dot)));
                        }
                        Array::new(y.shape().to_vec(), out).expect("softmax shape")
                    }
                };
                slot(grads, *x, xv.shape()).add_assign(&local);
            }
            Op::Add { a, b } => {
                for &t in &[*a, *b] {
                    if self.wants(t) {
                        slot(grads, t, g.shape()).add_assign(g);
                    }
                }
            }
            Op::Mul { a, b } => {
                if self.wants(*a) {
                    let d = g.zip_map(&self.nodes[*b].value, |gi, bv| gi * bv);
                    slot(grads, *a, g.shape()).add_assign(&d);
                }
                if self.wants(*b) {
                    let d = g.zip_map(&self.nodes[*a].value, |gi, av| gi * av);
                    slot(grads, *b, g.shape()).add_assign(&d);
                }
            }
            Op::ScaleShift { x, scale } => {
                if self.wants(*x) {
                    let s = *scale;
                    slot(grads, *x, g.shape()).add_assign(&g.map(|gi| gi * s));
                }
            }
            Op::ConcatCols { parts } => {
                let rows = g.shape()[0];
                let total = g.shape()[1];
                let mut offset = 0;
                for &p in parts {
                    let width = self.nodes[p].value.shape()[1];
                    if self.wants(p) {
                        let gp = slot(grads, p, self.nodes[p].value.shape());
                        for r in 0..rows {
                            let src = &g.data()[r * total + offset..r * total + offset + width];
                            for (acc, v) in gp.data_mut()[r * width..(r + 1) * width].iter_mut().zip(src) {
                                *acc += v;
                            }
                        }
                    }
                    offset += width;
                }
            }
            Op::SliceCols { x, start } => {
                if !self.wants(*x) {
                    return;
                }
                let full = self.nodes[*x].value.shape();
                let cols = full[1];
                let width = g.shape()[1];
                let gx = slot(grads, *x, full);
                for (r, row) in g.rows().enumerate() {
                    let dst = &mut gx.data_mut()[r * cols + start..r * cols + start + width];
                    for (acc, v) in dst.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
            }
            Op::Reshape { x } => {
                if self.wants(*x) {
                    let shape = self.nodes[*x].value.shape();
                    let gx = slot(grads, *x, shape);
                    for (acc, v) in gx.data_mut().iter_mut().zip(g.data()) {
                        *acc += v;
                    }
                }
            }
            Op::MeanTime { x } => {
                if self.wants(*x) {
                    let shape = self.nodes[*x].value.shape();
                    let m = shape[2];
                    let gx = slot(grads, *x, shape);
                    for (chunk, &gi) in gx.data_mut().chunks_mut(m).zip(g.data()) {
                        for acc in chunk {
                            *acc += gi / m as f64;
                        }
                    }
                }
            }
            Op::Sum { x } | Op::Mean { x } => {
                if self.wants(*x) {
                    let shape = self.nodes[*x].value.shape();
                    let n = self.nodes[*x].value.len() as f64;
                    let gi = match node.op {
                        Op::Mean { .. } => g.item() / n,
                        _ => g.item(),
                    };
                    for acc in slot(grads, *x, shape).data_mut() {
                        *acc += gi;
                    }
                }
            }
            Op::LogClamped { x, lo, hi } => {
                if self.wants(*x) {
                    let xv = &self.nodes[*x].value;
                    let d = xv.zip_map(g, |v, gi| if v < *lo || v > *hi { 0.0 } else { gi / v });
                    slot(grads, *x, xv.shape()).add_assign(&d);
                }
            }
            Op::Gather { x, idx } => {
                if self.wants(*x) {
                    let shape = self.nodes[*x].value.shape();
                    let cols = shape[1];
                    let gx = slot(grads, *x, shape);
                    for (i, (&j, &gi)) in idx.iter().zip(g.data()).enumerate() {
                        gx.data_mut()[i * cols + j] += gi;
                    }
                }
            }
            Op::Select { keep, fill, take_fill } => {
                for (target, want_fill) in [(*keep, false), (*fill, true)] {
                    if self.wants(target) {
                        let gt = slot(grads, target, g.shape());
                        for ((acc, &gi), &t) in gt.data_mut().iter_mut().zip(g.data()).zip(take_fill) {
                            if t == want_fill {
                                *acc += gi;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn slot<'a>(grads: &'a mut [Option<Array>], i: usize, shape: &[usize]) -> &'a mut Array {
    grads[i].get_or_insert_with(|| Array::zeros(shape))
}

pub fn affine_forward(x: &Array, w: &Array, b: &Array) -> Result<Array> {
    let (xs, ws, bs) = (x.shape(), w.shape(), b.shape());
    if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 || xs[1] != ws[0] || ws[1] != bs[0] {
        return Err(Error::shape("affine", format!("x {xs:?}, W {ws:?}, b {bs:?}")));
    }
    let (n, din, dout) = (xs[0], xs[1], ws[1]);
    let mut out = Vec::with_capacity(n * dout);
    for _ in 0..n {
        out.extend_from_slice(b.data());
    }
    gemm_acc(x.data(), w.data(), &mut out, n, din, dout);
    Array::new(vec![n, dout], out)
}

struct ConvGeometry {
    n: usize,
    c_in: usize,
    m: usize,
    c_out: usize,
    f: usize,
    m_out: usize,
    stride: usize,
    padding: usize,
}

impl ConvGeometry {
    fn new(xs: &[usize], ks: &[usize], stride: usize, padding: usize) -> Result<Self> {
        if xs.len() != 3 || ks.len() != 3 || xs[1] != ks[1] {
            return Err(Error::shape("conv1d", format!("x {xs:?}, kernels {ks:?}")));
        }
        if stride == 0 {
            return Err(Error::shape("conv1d", "stride must be positive"));
        }
        let padded = xs[2] + 2 * padding;
        if ks[2] > padded {
            return Err(Error::shape(
                "conv1d",
                format!("filter length {} exceeds padded length {padded}", ks[2]),
            ));
        }
        Ok(ConvGeometry {
            n: xs[0],
            c_in: xs[1],
            m: xs[2],
            c_out: ks[0],
            f: ks[2],
            m_out: (padded - ks[2]) / stride + 1,
            stride,
            padding,
        })
    }

    fn of(xs: &[usize], ks: &[usize], stride: usize, padding: usize) -> Self {
        Self::new(xs, ks, stride, padding).expect("geometry validated in forward")
    }

    fn rows(&self) -> usize {
        self.n * self.m_out
    }

    fn patch(&self) -> usize {
        self.c_in * self.f
    }

    /// Unfolds `x` into a `(n·m_out)×(c_in·f)` matrix of receptive fields.
    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let mut cols = vec![0.0; self.rows() * self.patch()];
        for s in 0..self.n {
            for t in 0..self.m_out {
                let row = &mut cols[(s * self.m_out + t) * self.patch()..][..self.patch()];
                for c in 0..self.c_in {
                    let series = &x[(s * self.c_in + c) * self.m..][..self.m];
                    for j in 0..self.f {
                        let pos = t * self.stride + j;
                        if pos >= self.padding && pos - self.padding < self.m {
                            row[c * self.f + j] = series[pos - self.padding];
                        }
                    }
                }
            }
        }
        cols
    }

    /// Adjoint of [`Self::im2col`]: scatter-adds columns back onto `dx`.
    fn col2im(&self, cols: &[f64], dx: &mut [f64]) {
        for s in 0..self.n {
            for t in 0..self.m_out {
                let row = &cols[(s * self.m_out + t) * self.patch()..][..self.patch()];
                for c in 0..self.c_in {
                    let series = &mut dx[(s * self.c_in + c) * self.m..][..self.m];
                    for j in 0..self.f {
                        let pos = t * self.stride + j;
                        if pos >= self.padding && pos - self.padding < self.m {
                            series[pos - self.padding] += row[c * self.f + j];
                        }
                    }
                }
            }
        }
    }

    /// Kernels `c_out×(c_in·f)` transposed to `(c_in·f)×c_out`.
    fn kernel_t(&self, k: &[f64]) -> Vec<f64> {
        let p = self.patch();
        let mut kt = vec![0.0; p * self.c_out];
        for o in 0..self.c_out {
            for q in 0..p {
                kt[q * self.c_out + o] = k[o * p + q];
            }
        }
        kt
    }

    /// Output gradient `n×c_out×m_out` rearranged to `(n·m_out)×c_out`.
    fn grad_rows(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows() * self.c_out];
        for s in 0..self.n {
            for o in 0..self.c_out {
                for t in 0..self.m_out {
                    out[(s * self.m_out + t) * self.c_out + o] = g[(s * self.c_out + o) * self.m_out + t];
                }
            }
        }
        out
    }
}

pub fn conv1d_forward(x: &Array, kernels: &Array, bias: &Array, stride: usize, padding: usize) -> Result<Array> {
    let geo = ConvGeometry::new(x.shape(), kernels.shape(), stride, padding)?;
    if bias.shape() != [geo.c_out] {
        return Err(Error::shape(
            "conv1d",
            format!("bias {:?} for {} output channels", bias.shape(), geo.c_out),
        ));
    }
    let cols = geo.im2col(x.data());
    let kt = geo.kernel_t(kernels.data());
    let mut prod = vec![0.0; geo.rows() * geo.c_out];
    gemm_acc(&cols, &kt, &mut prod, geo.rows(), geo.patch(), geo.c_out);
    let mut out = vec![0.0; geo.n * geo.c_out * geo.m_out];
    for s in 0..geo.n {
        for o in 0..geo.c_out {
            for t in 0..geo.m_out {
                out[(s * geo.c_out + o) * geo.m_out + t] = prod[(s * geo.m_out + t) * geo.c_out + o] + bias.data()[o];
            }
        }
    }
    Array::new(vec![geo.n, geo.c_out, geo.m_out], out)
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn activate(x: &Array, kind: Activation) -> Result<Array> {
    Ok(match kind {
        Activation::Relu => x.map(|v| v.max(0.0)),
        Activation::LeakyRelu => x.map(|v| if v > 0.0 { v } else { LEAKY_SLOPE * v }),
        Activation::Sigmoid => x.map(sigmoid),
        Activation::Tanh => x.map(f64::tanh),
        Activation::SoftmaxRows => {
            if x.ndim() != 2 {
                return Err(Error::shape(
                    "softmax_rows",
                    format!("expected 2-D, got {:?}", x.shape()),
                ));
            }
            let mut out = Vec::with_capacity(x.len());
            for row in x.rows() {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let start = out.len();
                out.extend(row.iter().map(|v| (v - max).exp()));
                let z: f64 = out[start..].iter().sum();
                for v in &mut out[start..] {
                    *v /= z;
                }
            }
            Array::new(x.shape().to_vec(), out)?
        }
    })
}
