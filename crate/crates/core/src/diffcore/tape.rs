//! Tape-based reverse-mode differentiation over [`Matrix`] values.
//!
//! Every forward operation appends a node holding its output value and the
//! information its backward rule needs. [`Tape::backward`] replays the nodes in
//! reverse, accumulating gradients for leaves and for parameters of the
//! borrowed [`ParamStore`].
//!
//! Row aggregation ([`Tape::scatter_add_rows`]) always sums in index-list
//! order, so results only depend on the order of the index list and never on
//! the numeric labels it contains.

use std::sync::Arc;

use super::matrix::{Gemm, Matrix};
use super::params::{ParamGrads, ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    Linear {
        x: Var,
        w: ParamId,
        bias: Option<ParamId>,
        row_offset: usize,
    },
    Sum(Vec<Var>),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    LayerNorm {
        x: Var,
        gain: ParamId,
        shift: ParamId,
        xhat: Matrix,
        inv_std: Vec<f64>,
    },
    GatherRows {
        x: Var,
        idx: Arc<[u32]>,
    },
    ScatterAddRows {
        x: Var,
        idx: Arc<[u32]>,
    },
    ConcatCols(Vec<Var>),
    EdgeTransform {
        x: Var,
        w: ParamId,
        senders: Arc<[u32]>,
        cin: usize,
        cout: usize,
    },
    MaskedSquaredError {
        pred: Var,
        target: Arc<Matrix>,
        free: Arc<[bool]>,
        scale: f64,
    },
    ZeroRows {
        x: Var,
        fixed: Arc<[bool]>,
    },
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Recorded computation borrowing parameter values from a [`ParamStore`].
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    pub params: ParamGrads,
    leaves: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient reaching a leaf, if any flowed to it.
    pub fn leaf(&self, v: Var) -> Option<&Matrix> {
        self.leaves.get(v.0).and_then(|g| g.as_ref())
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of stored activation elements; used as a memory proxy.
    pub fn activation_elements(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| {
                n.value.len()
                    + match &n.op {
                        Op::LayerNorm { xhat, .. } => xhat.len(),
                        _ => 0,
                    }
            })
            .sum()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.get(0, 0)
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Input or constant. Gradients reaching it are reported by [`Gradients::leaf`].
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// `x * W + b`, where `W` may be a row block starting at `row_offset`
    /// (the block height is `x.cols()`).
    pub fn linear(
        &mut self,
        x: Var,
        w: ParamId,
        bias: Option<ParamId>,
        row_offset: usize,
    ) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.params.value(w);
        let (m, k) = xv.shape();
        let n = wv.cols();
        if row_offset + k > wv.rows() {
            return Err(Error::shape(
                "linear",
                format!(
                    "input width {k} at row offset {row_offset} exceeds weight rows {}",
                    wv.rows()
                ),
            ));
        }
        let mut out = Matrix::zeros(m, n);
        if let Some(b) = bias {
            let bv = self.params.value(b);
            if bv.shape() != (1, n) {
                return Err(Error::shape(
                    "linear",
                    format!("bias shape {:?}, expected (1, {n})", bv.shape()),
                ));
            }
            for r in 0..m {
                out.row_mut(r).copy_from_slice(bv.as_slice());
            }
        }
        Gemm {
            a: xv.as_slice(),
            a_cols: k,
            a_t: false,
            b: &wv.as_slice()[row_offset * n..(row_offset + k) * n],
            b_cols: n,
            b_t: false,
        }
        .run(m, k, n, if bias.is_some() { 1.0 } else { 0.0 }, out.as_mut_slice());
        Ok(self.push(
            out,
            Op::Linear {
                x,
                w,
                bias,
                row_offset,
            },
        ))
    }

    /// Element-wise sum of equally shaped matrices.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let first = *terms
            .first()
            .ok_or_else(|| Error::shape("sum", "no terms"))?;
        let mut out = self.value(first).clone();
        for &t in &terms[1..] {
            let tv = self.value(t);
            if tv.shape() != out.shape() {
                return Err(Error::shape(
                    "sum",
                    format!("{:?} vs {:?}", out.shape(), tv.shape()),
                ));
            }
            out.add_assign(tv);
        }
        Ok(self.push(out, Op::Sum(terms.to_vec())))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.sum(&[a, b])
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let mut out = self.value(x).clone();
        out.scale(s);
        self.push(out, Op::Scale(x, s))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        out.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
        self.push(out, Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, alpha: f64) -> Var {
        let mut out = self.value(x).clone();
        out.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = leaky_relu(*v, alpha));
        self.push(out, Op::LeakyRelu(x, alpha))
    }

    /// Per-row layer normalization with learned gain and shift (both `1 x C`).
    pub fn layer_norm(&mut self, x: Var, gain: ParamId, shift: ParamId, eps: f64) -> Result<Var> {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let g = self.params.value(gain);
        let b = self.params.value(shift);
        if g.shape() != (1, cols) || b.shape() != (1, cols) {
            return Err(Error::shape(
                "layer_norm",
                format!("gain/shift must be (1, {cols})"),
            ));
        }
        let mut xhat = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let s = layer_norm_row(xv.row(r), eps, xhat.row_mut(r));
            inv_std.push(s);
            let o = out.row_mut(r);
            let xh = xhat.row(r);
            for c in 0..cols {
                o[c] = xh[c] * g.as_slice()[c] + b.as_slice()[c];
            }
        }
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                shift,
                xhat,
                inv_std,
            },
        ))
    }

    /// `out[i] = x[idx[i]]`.
    pub fn gather_rows(&mut self, x: Var, idx: Arc<[u32]>) -> Result<Var> {
        let xv = self.value(x);
        let cols = xv.cols();
        let mut out = Matrix::zeros(idx.len(), cols);
        for (i, &j) in idx.iter().enumerate() {
            let j = j as usize;
            if j >= xv.rows() {
                return Err(Error::shape(
                    "gather_rows",
                    format!("index {j} out of range for {} rows", xv.rows()),
                ));
            }
            out.row_mut(i).copy_from_slice(xv.row(j));
        }
        Ok(self.push(out, Op::GatherRows { x, idx }))
    }

    /// `out[idx[i]] += x[i]` over `i` in list order; rows never indexed stay zero.
    pub fn scatter_add_rows(&mut self, x: Var, idx: Arc<[u32]>, out_rows: usize) -> Result<Var> {
        let xv = self.value(x);
        if xv.rows() != idx.len() {
            return Err(Error::shape(
                "scatter_add_rows",
                format!("{} rows for {} indices", xv.rows(), idx.len()),
            ));
        }
        let cols = xv.cols();
        let mut out = Matrix::zeros(out_rows, cols);
        for (i, &j) in idx.iter().enumerate() {
            let j = j as usize;
            if j >= out_rows {
                return Err(Error::shape(
                    "scatter_add_rows",
                    format!("index {j} out of range for {out_rows} rows"),
                ));
            }
            let src = xv.row(i);
            let dst = out.row_mut(j);
            for c in 0..cols {
                dst[c] += src[c];
            }
        }
        Ok(self.push(out, Op::ScatterAddRows { x, idx }))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|p| self.value(*p).rows())
            .ok_or_else(|| Error::shape("concat_cols", "no parts"))?;
        let widths: Vec<usize> = parts.iter().map(|p| self.value(*p).cols()).collect();
        if parts.iter().any(|p| self.value(*p).rows() != rows) {
            return Err(Error::shape("concat_cols", "row counts differ"));
        }
        let total: usize = widths.iter().sum();
        let mut out = Matrix::zeros(rows, total);
        for r in 0..rows {
            let mut off = 0;
            for (p, w) in parts.iter().zip(&widths) {
                out.row_mut(r)[off..off + w].copy_from_slice(self.value(*p).row(r));
                off += w;
            }
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Per-edge linear map with a distinct `cin x cout` weight block per edge:
    /// `out[e] = x[senders[e]] * W_e`, where row `e` of `w` stores `W_e` row-major.
    pub fn edge_transform(
        &mut self,
        x: Var,
        w: ParamId,
        senders: Arc<[u32]>,
        cout: usize,
    ) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.params.value(w);
        let cin = xv.cols();
        if wv.rows() != senders.len() || wv.cols() != cin * cout {
            return Err(Error::shape(
                "edge_transform",
                format!(
                    "weight {:?} for {} edges of {cin} -> {cout} channels",
                    wv.shape(),
                    senders.len()
                ),
            ));
        }
        let mut out = Matrix::zeros(senders.len(), cout);
        for (e, &s) in senders.iter().enumerate() {
            let s = s as usize;
            if s >= xv.rows() {
                return Err(Error::shape("edge_transform", "sender out of range"));
            }
            let xs = xv.row(s);
            let we = wv.row(e);
            let o = out.row_mut(e);
            for c in 0..cin {
                let xc = xs[c];
                let wc = &we[c * cout..(c + 1) * cout];
                for k in 0..cout {
                    o[k] += xc * wc[k];
                }
            }
        }
        Ok(self.push(
            out,
            Op::EdgeTransform {
                x,
                w,
                senders,
                cin,
                cout,
            },
        ))
    }

    /// `scale * Σ_{free rows} Σ_c (pred - target)^2` as a `1 x 1` value.
    pub fn masked_squared_error(
        &mut self,
        pred: Var,
        target: Arc<Matrix>,
        free: Arc<[bool]>,
        scale: f64,
    ) -> Result<Var> {
        let pv = self.value(pred);
        if pv.shape() != target.shape() || free.len() != pv.rows() {
            return Err(Error::shape(
                "masked_squared_error",
                format!(
                    "pred {:?}, target {:?}, mask {}",
                    pv.shape(),
                    target.shape(),
                    free.len()
                ),
            ));
        }
        let mut acc = 0.0;
        for r in 0..pv.rows() {
            if free[r] {
                for (p, t) in pv.row(r).iter().zip(target.row(r)) {
                    let d = p - t;
                    acc += d * d;
                }
            }
        }
        Ok(self.push(
            Matrix::from_vec(1, 1, vec![scale * acc]),
            Op::MaskedSquaredError {
                pred,
                target,
                free,
                scale,
            },
        ))
    }

    /// Overwrites rows flagged in `fixed` with zeros.
    pub fn zero_rows(&mut self, x: Var, fixed: Arc<[bool]>) -> Result<Var> {
        let mut out = self.value(x).clone();
        if fixed.len() != out.rows() {
            return Err(Error::shape("zero_rows", "mask length differs from row count"));
        }
        for (r, &f) in fixed.iter().enumerate() {
            if f {
                out.row_mut(r).fill(0.0);
            }
        }
        Ok(self.push(out, Op::ZeroRows { x, fixed }))
    }

    /// Reverse pass seeded with `dL/dv` for each `(v, grad)` pair.
    pub fn backward(&self, seeds: Vec<(Var, Matrix)>) -> Result<Gradients> {
        let n = self.nodes.len();
        let mut grads: Vec<Option<Matrix>> = (0..n).map(|_| None).collect();
        for (v, g) in seeds {
            if g.shape() != self.value(v).shape() {
                return Err(Error::shape("backward", "seed shape differs from value"));
            }
            accumulate(&mut grads[v.0], g);
        }
        let mut pgrads: Vec<Option<Matrix>> = (0..self.params.len()).map(|_| None).collect();
        let mut leaves: Vec<Option<Matrix>> = (0..n).map(|_| None).collect();

        for i in (0..n).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => leaves[i] = Some(dy),
                Op::Linear {
                    x,
                    w,
                    bias,
                    row_offset,
                } => {
                    let xv = self.value(*x);
                    let wv = self.params.value(*w);
                    let (m, k) = xv.shape();
                    let nout = wv.cols();
                    let wblock = &wv.as_slice()[row_offset * nout..(row_offset + k) * nout];
                    // dx = dy * W_block^T
                    let mut dx = Matrix::zeros(m, k);
                    Gemm {
                        a: dy.as_slice(),
                        a_cols: nout,
                        a_t: false,
                        b: wblock,
                        b_cols: nout,
                        b_t: true,
                    }
                    .run(m, nout, k, 0.0, dx.as_mut_slice());
                    accumulate(&mut grads[x.0], dx);
                    // dW_block += x^T * dy
                    let gw = pgrads[w.0].get_or_insert_with(|| Matrix::zeros(wv.rows(), nout));
                    Gemm {
                        a: xv.as_slice(),
                        a_cols: k,
                        a_t: true,
                        b: dy.as_slice(),
                        b_cols: nout,
                        b_t: false,
                    }
                    .run(
                        k,
                        m,
                        nout,
                        1.0,
                        &mut gw.as_mut_slice()[row_offset * nout..(row_offset + k) * nout],
                    );
                    if let Some(b) = bias {
                        let gb = pgrads[b.0].get_or_insert_with(|| Matrix::zeros(1, nout));
                        let gbs = gb.as_mut_slice();
                        for r in 0..m {
                            for (acc, d) in gbs.iter_mut().zip(dy.row(r)) {
                                *acc += d;
                            }
                        }
                    }
                }
                Op::Sum(terms) => {
                    let (last, rest) = terms.split_last().expect("non-empty sum");
                    for t in rest {
                        accumulate(&mut grads[t.0], dy.clone());
                    }
                    accumulate(&mut grads[last.0], dy);
                }
                Op::Scale(x, s) => {
                    let mut dx = dy;
                    dx.scale(*s);
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Relu(x) => {
                    let mut dx = dy;
                    for (d, y) in dx.as_mut_slice().iter_mut().zip(node.value.as_slice()) {
                        if *y <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                }
                Op::LeakyRelu(x, alpha) => {
                    let xv = self.value(*x);
                    let mut dx = dy;
                    for (d, xi) in dx.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                        if *xi < 0.0 {
                            *d *= alpha;
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    shift,
                    xhat,
                    inv_std,
                } => {
                    let (rows, cols) = xhat.shape();
                    let g = self.params.value(*gain).as_slice();
                    let mut dgain = vec![0.0; cols];
                    let mut dshift = vec![0.0; cols];
                    let mut dx = Matrix::zeros(rows, cols);
                    let mut dxhat = vec![0.0; cols];
                    for r in 0..rows {
                        let dyr = dy.row(r);
                        let xh = xhat.row(r);
                        let mut mean_d = 0.0;
                        let mut mean_dx = 0.0;
                        for c in 0..cols {
                            dgain[c] += dyr[c] * xh[c];
                            dshift[c] += dyr[c];
                            dxhat[c] = dyr[c] * g[c];
                            mean_d += dxhat[c];
                            mean_dx += dxhat[c] * xh[c];
                        }
                        mean_d /= cols as f64;
                        mean_dx /= cols as f64;
                        let s = inv_std[r];
                        let out = dx.row_mut(r);
                        for c in 0..cols {
                            out[c] = s * (dxhat[c] - mean_d - xh[c] * mean_dx);
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                    accumulate(&mut pgrads[gain.0], Matrix::from_vec(1, cols, dgain));
                    accumulate(&mut pgrads[shift.0], Matrix::from_vec(1, cols, dshift));
                }
                Op::GatherRows { x, idx } => {
                    let xv = self.value(*x);
                    let cols = xv.cols();
                    let mut dx = Matrix::zeros(xv.rows(), cols);
                    for (i, &j) in idx.iter().enumerate() {
                        let src = dy.row(i);
                        let dst = dx.row_mut(j as usize);
                        for c in 0..cols {
                            dst[c] += src[c];
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                }
                Op::ScatterAddRows { x, idx } => {
                    let cols = dy.cols();
                    let mut dx = Matrix::zeros(idx.len(), cols);
                    for (i, &j) in idx.iter().enumerate() {
                        dx.row_mut(i).copy_from_slice(dy.row(j as usize));
                    }
                    accumulate(&mut grads[x.0], dx);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        let mut dp = Matrix::zeros(dy.rows(), w);
                        for r in 0..dy.rows() {
                            dp.row_mut(r).copy_from_slice(&dy.row(r)[off..off + w]);
                        }
                        accumulate(&mut grads[p.0], dp);
                        off += w;
                    }
                }
                Op::EdgeTransform {
                    x,
                    w,
                    senders,
                    cin,
                    cout,
                } => {
                    let (cin, cout) = (*cin, *cout);
                    let xv = self.value(*x);
                    let wv = self.params.value(*w);
                    let mut dx = Matrix::zeros(xv.rows(), cin);
                    let gw = pgrads[w.0].get_or_insert_with(|| Matrix::zeros(wv.rows(), wv.cols()));
                    for (e, &s) in senders.iter().enumerate() {
                        let s = s as usize;
                        let de = dy.row(e);
                        let xs = xv.row(s);
                        let we = wv.row(e);
                        let gwe = gw.row_mut(e);
                        let dxs = dx.row_mut(s);
                        for c in 0..cin {
                            let wc = &we[c * cout..(c + 1) * cout];
                            let gwc = &mut gwe[c * cout..(c + 1) * cout];
                            let mut acc = 0.0;
                            for k in 0..cout {
                                acc += wc[k] * de[k];
                                gwc[k] += xs[c] * de[k];
                            }
                            dxs[c] += acc;
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                }
                Op::MaskedSquaredError {
                    pred,
                    target,
                    free,
                    scale,
                } => {
                    let pv = self.value(*pred);
                    let g = dy.get(0, 0) * 2.0 * scale;
                    let mut dp = Matrix::zeros(pv.rows(), pv.cols());
                    for r in 0..pv.rows() {
                        if free[r] {
                            let out = dp.row_mut(r);
                            for (c, (p, t)) in pv.row(r).iter().zip(target.row(r)).enumerate() {
                                out[c] = g * (p - t);
                            }
                        }
                    }
                    accumulate(&mut grads[pred.0], dp);
                }
                Op::ZeroRows { x, fixed } => {
                    let mut dx = dy;
                    for (r, &f) in fixed.iter().enumerate() {
                        if f {
                            dx.row_mut(r).fill(0.0);
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                }
            }
        }
        Ok(Gradients {
            params: ParamGrads(pgrads),
            leaves,
        })
    }

    /// Reverse pass from a `1 x 1` output.
    pub fn backward_scalar(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::shape("backward_scalar", "output is not a scalar"));
        }
        self.backward(vec![(loss, Matrix::filled(1, 1, 1.0))])
    }
}

fn accumulate(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[inline]
pub fn leaky_relu(x: f64, alpha: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        alpha * x
    }
}

/// Normalizes one row into `out` with population variance; returns `1/sqrt(var + eps)`.
pub fn layer_norm_row(x: &[f64], eps: f64, out: &mut [f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + eps).sqrt();
    for (o, v) in out.iter_mut().zip(x) {
        *o = (v - mean) * inv_std;
    }
    inv_std
}
