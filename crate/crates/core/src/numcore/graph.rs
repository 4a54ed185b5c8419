//! Tape-based reverse-mode automatic differentiation over rank-2 tensors.
//!
//! A [`Graph`] records every operation applied during a forward pass.
//! [`Graph::backward`] walks the tape in reverse and adds `∂loss/∂param` into
//! a [`Gradients`] buffer. Nodes that do not depend on a parameter are never
//! differentiated.

use super::params::{Gradients, ParamId, ParamSet};
use super::tensor::{gemm, Tensor};
use super::NumError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Gather(Var, Vec<usize>),
    Reshape(Var),
    SoftmaxRows(Var),
    GroupWeightedSum { values: Var, weights: Var },
    MaxRows(Var, Vec<usize>),
    CrossEntropy(Var, Vec<usize>, Tensor),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    tracked: bool,
}

pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

fn shape_err<T>(msg: String) -> Result<T, NumError> {
    Err(NumError::Shape(msg))
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Graph<'p> {
        Graph { params, nodes: Vec::new(), param_vars: vec![None; params.len()] }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    /// A constant leaf.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, false)
    }

    /// The (cached) leaf for parameter `id`.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let v = self.push(self.params.get(id).clone(), Op::Param(id), true);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return shape_err(format!("matmul {m}x{k} by {k2}x{n}"));
        }
        let mut out = Tensor::zeros(m, n);
        gemm(m, k, n, self.value(a).data(), (k as isize, 1), self.value(b).data(), (n as isize, 1), 0.0, out.data_mut());
        let tr = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::MatMul(a, b), tr))
    }

    fn zip_same(&mut self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, NumError> {
        if self.shape(a) != self.shape(b) {
            return shape_err(format!("{what} {:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        let (r, c) = self.shape(a);
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| f(*x, *y)).collect();
        Ok(Tensor::matrix(r, c, data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let out = self.zip_same(a, b, "add", |x, y| x + y)?;
        let tr = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::Add(a, b), tr))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let out = self.zip_same(a, b, "sub", |x, y| x - y)?;
        let tr = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::Sub(a, b), tr))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let out = self.zip_same(a, b, "mul", |x, y| x * y)?;
        let tr = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::Mul(a, b), tr))
    }

    /// `a + row`, broadcasting a `1×n` row over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NumError> {
        let (m, n) = self.shape(a);
        if self.shape(row) != (1, n) {
            return shape_err(format!("add_row {m}x{n} with {:?}", self.shape(row)));
        }
        let mut out = self.value(a).clone();
        let r = self.value(row).data().to_vec();
        for chunk in out.data_mut().chunks_mut(n) {
            for (x, y) in chunk.iter_mut().zip(&r) {
                *x += y;
            }
        }
        let tr = self.tracked(a) || self.tracked(row);
        Ok(self.push(out, Op::AddRow(a, row), tr))
    }

    pub fn scale(&mut self, a: Var, f: f64) -> Var {
        let (r, c) = self.shape(a);
        let out = Tensor::matrix(r, c, self.value(a).data().iter().map(|x| x * f).collect());
        let tr = self.tracked(a);
        self.push(out, Op::Scale(a, f), tr)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let (r, c) = self.shape(a);
        let out = Tensor::matrix(r, c, self.value(a).data().iter().map(|x| x + s).collect());
        let tr = self.tracked(a);
        self.push(out, Op::AddScalar(a), tr)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = Tensor::matrix(r, c, self.value(a).data().iter().map(|x| x.tanh()).collect());
        let tr = self.tracked(a);
        self.push(out, Op::Tanh(a), tr)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = Tensor::matrix(r, c, self.value(a).data().iter().map(|x| sigmoid(*x)).collect());
        let tr = self.tracked(a);
        self.push(out, Op::Sigmoid(a), tr)
    }

    /// `a ⊕ b ⊕ ...` along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let Some(&first) = parts.first() else { return shape_err("concat of nothing".into()) };
        let m = self.shape(first).0;
        if parts.iter().any(|&p| self.shape(p).0 != m) {
            return shape_err("concat_cols row mismatch".into());
        }
        let n: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut data = Vec::with_capacity(m * n);
        for r in 0..m {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let tr = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(Tensor::matrix(m, n, data), Op::ConcatCols(parts.to_vec()), tr))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let Some(&first) = parts.first() else { return shape_err("concat of nothing".into()) };
        let n = self.shape(first).1;
        if parts.iter().any(|&p| self.shape(p).1 != n) {
            return shape_err("concat_rows column mismatch".into());
        }
        let m: usize = parts.iter().map(|&p| self.shape(p).0).sum();
        let mut data = Vec::with_capacity(m * n);
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let tr = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(Tensor::matrix(m, n, data), Op::ConcatRows(parts.to_vec()), tr))
    }

    /// Rows of `a` selected (with repetition) by `idx`.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var, NumError> {
        let (m, n) = self.shape(a);
        if let Some(bad) = idx.iter().find(|&&i| i >= m) {
            return shape_err(format!("gather row {bad} of {m}"));
        }
        let mut data = Vec::with_capacity(idx.len() * n);
        let src = self.value(a);
        for &i in idx {
            data.extend_from_slice(src.row_slice(i));
        }
        let tr = self.tracked(a);
        Ok(self.push(Tensor::matrix(idx.len(), n, data), Op::Gather(a, idx.to_vec()), tr))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, NumError> {
        let (m, n) = self.shape(a);
        if m * n != rows * cols {
            return shape_err(format!("reshape {m}x{n} to {rows}x{cols}"));
        }
        let out = self.value(a).clone().reshaped(rows, cols);
        let tr = self.tracked(a);
        Ok(self.push(out, Op::Reshape(a), tr))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let mut out = self.value(a).clone();
        for chunk in out.data_mut().chunks_mut(n.max(1)) {
            softmax_in_place(chunk);
        }
        debug_assert_eq!(out.rows(), m);
        let tr = self.tracked(a);
        self.push(out, Op::SoftmaxRows(a), tr)
    }

    /// `out[u] = Σ_g weights[u, g] · values[u·G + g]` for `G = weights.cols()`.
    pub fn group_weighted_sum(&mut self, values: Var, weights: Var) -> Result<Var, NumError> {
        let (u, g) = self.shape(weights);
        let (rows, n) = self.shape(values);
        if rows != u * g {
            return shape_err(format!("group_weighted_sum {rows} rows vs {u}x{g} weights"));
        }
        let mut out = Tensor::zeros(u, n);
        {
            let v = self.value(values);
            let w = self.value(weights);
            let od = out.data_mut();
            for ui in 0..u {
                let dst = &mut od[ui * n..(ui + 1) * n];
                for gi in 0..g {
                    let wt = w.get(ui, gi);
                    for (d, s) in dst.iter_mut().zip(v.row_slice(ui * g + gi)) {
                        *d += wt * s;
                    }
                }
            }
        }
        let tr = self.tracked(values) || self.tracked(weights);
        Ok(self.push(out, Op::GroupWeightedSum { values, weights }, tr))
    }

    /// Column-wise maximum over rows (`1×n`). Ties resolve to the first row.
    pub fn max_rows(&mut self, a: Var) -> Result<Var, NumError> {
        let (m, n) = self.shape(a);
        if m == 0 {
            return shape_err("max over zero rows".into());
        }
        let src = self.value(a);
        let mut arg = vec![0usize; n];
        let mut best = src.row_slice(0).to_vec();
        for r in 1..m {
            for (c, &x) in src.row_slice(r).iter().enumerate() {
                if x > best[c] {
                    best[c] = x;
                    arg[c] = r;
                }
            }
        }
        let tr = self.tracked(a);
        Ok(self.push(Tensor::row(best), Op::MaxRows(a, arg), tr))
    }

    /// Summed cross-entropy of row-wise softmax(`logits`) against `targets`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var, NumError> {
        let (m, q) = self.shape(logits);
        if targets.len() != m || targets.iter().any(|&t| t >= q) {
            return shape_err(format!("cross_entropy targets {targets:?} for {m}x{q}"));
        }
        let mut probs = self.value(logits).clone();
        let mut loss = 0.0;
        for (r, chunk) in probs.data_mut().chunks_mut(q).enumerate() {
            let max = chunk.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + chunk.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            loss += lse - chunk[targets[r]];
            softmax_in_place(chunk);
        }
        let tr = self.tracked(logits);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy(logits, targets.to_vec(), probs), tr))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let tr = self.tracked(a);
        self.push(Tensor::scalar(s), Op::Sum(a), tr)
    }

    /// Adds `∂loss/∂param` for every parameter reachable from `loss` into
    /// `grads`.
    pub fn backward(&self, loss: Var, grads: &mut Gradients) -> Result<(), NumError> {
        if self.shape(loss) != (1, 1) {
            return Err(NumError::NotScalar(self.shape(loss)));
        }
        let mut gs: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        gs[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            let Some(g) = gs[i].take() else { continue };
            self.backprop_node(node, g, &mut gs, grads);
        }
        Ok(())
    }

    fn slot<'a>(&self, gs: &'a mut [Option<Tensor>], v: Var) -> Option<&'a mut Tensor> {
        let node = &self.nodes[v.0];
        if !node.tracked {
            return None;
        }
        Some(gs[v.0].get_or_insert_with(|| Tensor::zeros(node.value.rows(), node.value.cols())))
    }

    fn backprop_node(&self, node: &Node, g: Tensor, gs: &mut [Option<Tensor>], grads: &mut Gradients) {
        match &node.op {
            Op::Input => {}
            Op::Param(id) => grads.get_mut(*id).add_assign(&g),
            Op::MatMul(a, b) => {
                let (m, k) = self.shape(*a);
                let n = self.shape(*b).1;
                let bv = self.value(*b).data();
                if let Some(da) = self.slot(gs, *a) {
                    // dA += G · Bᵀ
                    gemm(m, n, k, g.data(), (n as isize, 1), bv, (1, n as isize), 1.0, da.data_mut());
                }
                let av = self.value(*a).data();
                if let Some(db) = self.slot(gs, *b) {
                    // dB += Aᵀ · G
                    gemm(k, m, n, av, (1, k as isize), g.data(), (n as isize, 1), 1.0, db.data_mut());
                }
            }
            Op::Add(a, b) => {
                if let Some(da) = self.slot(gs, *a) {
                    da.add_assign(&g);
                }
                if let Some(db) = self.slot(gs, *b) {
                    db.add_assign(&g);
                }
            }
            Op::Sub(a, b) => {
                if let Some(da) = self.slot(gs, *a) {
                    da.add_assign(&g);
                }
                if let Some(db) = self.slot(gs, *b) {
                    for (d, x) in db.data_mut().iter_mut().zip(g.data()) {
                        *d -= x;
                    }
                }
            }
            Op::AddRow(a, row) => {
                if let Some(da) = self.slot(gs, *a) {
                    da.add_assign(&g);
                }
                let n = g.cols();
                if let Some(dr) = self.slot(gs, *row) {
                    for chunk in g.data().chunks(n) {
                        for (d, x) in dr.data_mut().iter_mut().zip(chunk) {
                            *d += x;
                        }
                    }
                }
            }
            Op::Mul(a, b) => {
                let bv = self.value(*b).data();
                if let Some(da) = self.slot(gs, *a) {
                    for ((d, x), y) in da.data_mut().iter_mut().zip(g.data()).zip(bv) {
                        *d += x * y;
                    }
                }
                let av = self.value(*a).data();
                if let Some(db) = self.slot(gs, *b) {
                    for ((d, x), y) in db.data_mut().iter_mut().zip(g.data()).zip(av) {
                        *d += x * y;
                    }
                }
            }
            Op::Scale(a, f) => {
                if let Some(da) = self.slot(gs, *a) {
                    for (d, x) in da.data_mut().iter_mut().zip(g.data()) {
                        *d += f * x;
                    }
                }
            }
            Op::AddScalar(a) | Op::Reshape(a) => {
                if let Some(da) = self.slot(gs, *a) {
                    for (d, x) in da.data_mut().iter_mut().zip(g.data()) {
                        *d += x;
                    }
                }
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                if let Some(da) = self.slot(gs, *a) {
                    for ((d, x), y) in da.data_mut().iter_mut().zip(g.data()).zip(y) {
                        *d += x * (1.0 - y * y);
                    }
                }
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                if let Some(da) = self.slot(gs, *a) {
                    for ((d, x), y) in da.data_mut().iter_mut().zip(g.data()).zip(y) {
                        *d += x * y * (1.0 - y);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let w = self.shape(p).1;
                    if let Some(dp) = self.slot(gs, p) {
                        for (r, chunk) in dp.data_mut().chunks_mut(w.max(1)).enumerate() {
                            for (d, x) in chunk.iter_mut().zip(&g.row_slice(r)[off..off + w]) {
                                *d += x;
                            }
                        }
                    }
                    off += w;
                }
            }
            Op::ConcatRows(parts) => {
                let n = g.cols();
                let mut off = 0;
                for &p in parts {
                    let h = self.shape(p).0;
                    if let Some(dp) = self.slot(gs, p) {
                        for (d, x) in dp.data_mut().iter_mut().zip(&g.data()[off * n..(off + h) * n]) {
                            *d += x;
                        }
                    }
                    off += h;
                }
            }
            Op::Gather(a, idx) => {
                let n = g.cols();
                if let Some(da) = self.slot(gs, *a) {
                    let dd = da.data_mut();
                    for (r, &i) in idx.iter().enumerate() {
                        for (d, x) in dd[i * n..(i + 1) * n].iter_mut().zip(g.row_slice(r)) {
                            *d += x;
                        }
                    }
                }
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let n = y.cols();
                if let Some(da) = self.slot(gs, *a) {
                    for (r, chunk) in da.data_mut().chunks_mut(n.max(1)).enumerate() {
                        let yr = y.row_slice(r);
                        let gr = g.row_slice(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((d, yy), gg) in chunk.iter_mut().zip(yr).zip(gr) {
                            *d += yy * (gg - dot);
                        }
                    }
                }
            }
            Op::GroupWeightedSum { values, weights } => {
                let (u, gsz) = self.shape(*weights);
                let n = g.cols();
                let w = self.value(*weights);
                if let Some(dv) = self.slot(gs, *values) {
                    let dd = dv.data_mut();
                    for ui in 0..u {
                        for gi in 0..gsz {
                            let wt = w.get(ui, gi);
                            let row = ui * gsz + gi;
                            for (d, x) in dd[row * n..(row + 1) * n].iter_mut().zip(g.row_slice(ui)) {
                                *d += wt * x;
                            }
                        }
                    }
                }
                let v = self.value(*values);
                if let Some(dw) = self.slot(gs, *weights) {
                    let dd = dw.data_mut();
                    for ui in 0..u {
                        for gi in 0..gsz {
                            let dot: f64 = v.row_slice(ui * gsz + gi).iter().zip(g.row_slice(ui)).map(|(a, b)| a * b).sum();
                            dd[ui * gsz + gi] += dot;
                        }
                    }
                }
            }
            Op::MaxRows(a, arg) => {
                let n = g.cols();
                if let Some(da) = self.slot(gs, *a) {
                    let dd = da.data_mut();
                    for (c, &r) in arg.iter().enumerate() {
                        dd[r * n + c] += g.data()[c];
                    }
                }
            }
            Op::CrossEntropy(logits, targets, probs) => {
                let scale = g.scalar_value();
                let q = probs.cols();
                if let Some(dl) = self.slot(gs, *logits) {
                    for (r, chunk) in dl.data_mut().chunks_mut(q).enumerate() {
                        for (c, d) in chunk.iter_mut().enumerate() {
                            let onehot = if c == targets[r] { 1.0 } else { 0.0 };
                            *d += scale * (probs.get(r, c) - onehot);
                        }
                    }
                }
            }
            Op::Sum(a) => {
                let s = g.scalar_value();
                if let Some(da) = self.slot(gs, *a) {
                    da.data_mut().iter_mut().for_each(|d| *d += s);
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable in-place softmax.
pub fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let mut out = xs.to_vec();
    softmax_in_place(&mut out);
    out
}
