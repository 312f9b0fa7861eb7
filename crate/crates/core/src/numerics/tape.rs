//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! Every operation appends a node to a [`Tape`] and returns a [`Var`]
//! handle. Inputs always precede their consumers, so [`Tape::backward`]
//! only has to walk the node list once in reverse. Gradients accumulate
//! when a node feeds several consumers.
//!
//! A tape is single-threaded and is meant to live for exactly one forward
//! and backward pass.

use super::tensor::{dot, gemm_nn, gemm_nt, gemm_tn, softmax_in_place, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Affine(Var, f64),
    Tanh(Var),
    Relu(Var),
    Softmax(Var),
    Concat(Vec<Var>, usize),
    Sum(Var),
    RowSums(Var),
    GatherRows(Var, Vec<usize>),
    PairwiseAdd(Var, Var),
    CosineRows { a: Var, b: Var, na: Vec<f64>, nb: Vec<f64> },
    SoftmaxXent { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
    BceLogits { logits: Var, targets: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Ordered record of operations for one forward/backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `v`; `None` only for nodes that never required one.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn check_same(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "{op}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
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

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    /// Records a leaf; it is differentiable iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let needs_grad = t.requires_grad();
        self.push(t, Op::Leaf, needs_grad)
    }

    /// Records a copy of `t` as a differentiable leaf.
    pub fn param(&mut self, t: &Tensor) -> Var {
        self.push(t.clone().with_grad(true), Op::Leaf, true)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t.with_grad(false), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn mat_dims(&self, op: &str, v: Var) -> Result<(usize, usize)> {
        let t = self.value(v);
        if t.ndim() != 2 {
            return Err(Error::dim(format!(
                "{op}: expected a matrix, got shape {:?}",
                t.shape()
            )));
        }
        Ok((t.shape()[0], t.shape()[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat_dims("matmul", a)?;
        let (k2, n) = self.mat_dims("matmul", b)?;
        if k != k2 {
            return Err(Error::dim(format!(
                "matmul: [{m}x{k}] * [{k2}x{n}] inner dimensions differ"
            )));
        }
        let mut out = vec![0.0; m * n];
        gemm_nn(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), ng))
    }

    /// `a * b^T` for `a: [m, k]` and `b: [n, k]`; weights stored as `[out, in]`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat_dims("matmul_nt", a)?;
        let (n, k2) = self.mat_dims("matmul_nt", b)?;
        if k != k2 {
            return Err(Error::dim(format!(
                "matmul_nt: [{m}x{k}] * [{n}x{k2}]^T inner dimensions differ"
            )));
        }
        let mut out = vec![0.0; m * n];
        gemm_nt(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMulNt(a, b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same("add", self.value(a), self.value(b))?;
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::Add(a, b), ng))
    }

    /// Adds a row vector (shape `[n]` or `[1, n]`) to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let ta = self.value(a);
        let tr = self.value(row);
        if tr.rows() != 1 || tr.cols() != ta.cols() {
            return Err(Error::dim(format!(
                "add_row: row shape {:?} does not broadcast over {:?}",
                tr.shape(),
                ta.shape()
            )));
        }
        let r = tr.data();
        let mut data = ta.data().to_vec();
        for chunk in data.chunks_mut(r.len()) {
            for (x, y) in chunk.iter_mut().zip(r) {
                *x += y;
            }
        }
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let ng = self.ng(a) || self.ng(row);
        Ok(self.push(value, Op::AddRow(a, row), ng))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same("mul", self.value(a), self.value(b))?;
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::Mul(a, b), ng))
    }

    /// Scales row `i` of `a` by `col[i]`; `col` has one entry per row.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let ta = self.value(a);
        let tc = self.value(col);
        if tc.len() != ta.rows() {
            return Err(Error::dim(format!(
                "mul_col: {} scales for {} rows",
                tc.len(),
                ta.rows()
            )));
        }
        let cols = ta.cols();
        let mut data = ta.data().to_vec();
        for (chunk, s) in data.chunks_mut(cols).zip(tc.data()) {
            for x in chunk.iter_mut() {
                *x *= s;
            }
        }
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let ng = self.ng(a) || self.ng(col);
        Ok(self.push(value, Op::MulCol(a, col), ng))
    }

    /// `scale * a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Result<Var> {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| scale * x + shift).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::Affine(a, scale), ng))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let ng = self.ng(a);
        Ok(self.push(value, op, ng))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    /// Softmax over the last axis, with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let cols = ta.cols();
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(cols) {
            softmax_in_place(row);
        }
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::Softmax(a), ng))
    }

    /// Concatenates matrices along `axis` (0 = rows, 1 = columns), or
    /// vectors along axis 0.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::dim("concat of an empty list"))?;
        let ndim = self.value(first).ndim();
        if ndim == 0 || ndim > 2 || axis >= ndim {
            return Err(Error::dim(format!(
                "concat: axis {axis} invalid for rank {ndim}"
            )));
        }
        for &p in parts {
            if self.value(p).ndim() != ndim {
                return Err(Error::dim("concat: operands of differing rank"));
            }
        }
        let value = if ndim == 1 || axis == 0 {
            let cols = self.value(first).cols();
            let mut data = Vec::new();
            let mut rows = 0;
            for &p in parts {
                let t = self.value(p);
                if ndim == 2 && t.cols() != cols {
                    return Err(Error::dim(format!(
                        "concat axis 0: column counts {cols} and {} differ",
                        t.cols()
                    )));
                }
                rows += t.rows();
                data.extend_from_slice(t.data());
            }
            if ndim == 1 {
                Tensor::vector(data)?
            } else {
                Tensor::matrix(rows, cols, data)?
            }
        } else {
            let rows = self.value(first).rows();
            let mut total = 0;
            for &p in parts {
                let t = self.value(p);
                if t.rows() != rows {
                    return Err(Error::dim(format!(
                        "concat axis 1: row counts {rows} and {} differ",
                        t.rows()
                    )));
                }
                total += t.cols();
            }
            let mut data = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for &p in parts {
                    data.extend_from_slice(self.value(p).row(r));
                }
            }
            Tensor::matrix(rows, total, data)?
        };
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(value, Op::Concat(parts.to_vec(), axis), ng))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        let ng = self.ng(a);
        Ok(self.push(Tensor::scalar(s), Op::Sum(a), ng))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len() as f64;
        let s = self.sum(a)?;
        self.affine(s, 1.0 / n, 0.0)
    }

    /// Per-row sums of a matrix, shape `[m, 1]`.
    pub fn row_sums(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let data: Vec<f64> = ta
            .data()
            .chunks(ta.cols())
            .map(|r| r.iter().sum())
            .collect();
        let value = Tensor::matrix(data.len(), 1, data)?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::RowSums(a), ng))
    }

    /// Selects rows of a matrix by index (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let (m, n) = self.mat_dims("gather_rows", a)?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
            return Err(Error::dim(format!(
                "gather_rows: index {bad} out of range for {m} rows"
            )));
        }
        let ta = self.value(a);
        let mut data = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            data.extend_from_slice(ta.row(i));
        }
        let value = Tensor::matrix(idx.len(), n, data)?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::GatherRows(a, idx.to_vec()), ng))
    }

    /// All-pairs row sums: output row `i * c_rows + j` is `a[i] + c[j]`.
    pub fn pairwise_add(&mut self, a: Var, c: Var) -> Result<Var> {
        let (ma, n) = self.mat_dims("pairwise_add", a)?;
        let (mc, n2) = self.mat_dims("pairwise_add", c)?;
        if n != n2 {
            return Err(Error::dim(format!(
                "pairwise_add: widths {n} and {n2} differ"
            )));
        }
        let ta = self.value(a);
        let tc = self.value(c);
        let mut data = Vec::with_capacity(ma * mc * n);
        for i in 0..ma {
            let ra = ta.row(i);
            for j in 0..mc {
                data.extend(ra.iter().zip(tc.row(j)).map(|(x, y)| x + y));
            }
        }
        let value = Tensor::matrix(ma * mc, n, data)?;
        let ng = self.ng(a) || self.ng(c);
        Ok(self.push(value, Op::PairwiseAdd(a, c), ng))
    }

    /// Row-wise cosine similarity, shape `[m, 1]`. `b` may be a single row
    /// broadcast against every row of `a`. Values are clamped to `[-1, 1]`.
    pub fn cosine_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let ta = self.value(a);
        let tb = self.value(b);
        if ta.cols() != tb.cols() || (tb.rows() != 1 && tb.rows() != ta.rows()) {
            return Err(Error::dim(format!(
                "cosine_rows: shapes {:?} and {:?} incompatible",
                ta.shape(),
                tb.shape()
            )));
        }
        let m = ta.rows();
        let mut out = Vec::with_capacity(m);
        let mut na = Vec::with_capacity(m);
        let mut nb = Vec::with_capacity(tb.rows());
        for j in 0..tb.rows() {
            let r = tb.row(j);
            nb.push(dot(r, r).sqrt());
        }
        for i in 0..m {
            let ra = ta.row(i);
            let jb = if tb.rows() == 1 { 0 } else { i };
            let n_a = dot(ra, ra).sqrt();
            if n_a == 0.0 || nb[jb] == 0.0 {
                return Err(Error::Degenerate(
                    "cosine similarity of a zero vector".into(),
                ));
            }
            out.push((dot(ra, tb.row(jb)) / (n_a * nb[jb])).clamp(-1.0, 1.0));
            na.push(n_a);
        }
        let value = Tensor::matrix(m, 1, out)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::CosineRows { a, b, na, nb }, ng))
    }

    /// Mean categorical cross-entropy of softmax(logits) against labels.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (m, n) = self.mat_dims("softmax_cross_entropy", logits)?;
        if labels.len() != m {
            return Err(Error::dim(format!(
                "softmax_cross_entropy: {} labels for {m} rows",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n) {
            return Err(Error::Data(format!(
                "label index {bad} outside {n} classes"
            )));
        }
        let mut probs = self.value(logits).data().to_vec();
        let mut loss = 0.0;
        for (row, &l) in probs.chunks_mut(n).zip(labels) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[l];
            softmax_in_place(row);
        }
        let ng = self.ng(logits);
        Ok(self.push(
            Tensor::scalar(loss / m as f64),
            Op::SoftmaxXent {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            ng,
        ))
    }

    /// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Result<Var> {
        let t = self.value(logits);
        if t.len() != targets.len() {
            return Err(Error::dim(format!(
                "bce_with_logits: {} targets for {} logits",
                targets.len(),
                t.len()
            )));
        }
        let loss: f64 = t
            .data()
            .iter()
            .zip(targets)
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .sum();
        let ng = self.ng(logits);
        Ok(self.push(
            Tensor::scalar(loss / targets.len() as f64),
            Op::BceLogits {
                logits,
                targets: targets.to_vec(),
            },
            ng,
        ))
    }

    /// Reverse pass from a scalar `loss`. Every differentiable leaf receives
    /// a gradient of its own shape (zeros if unreachable from `loss`).
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lt.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        let grads = self
            .nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| match g {
                Some(g) => Tensor::new(node.value.shape().to_vec(), g).ok(),
                None if node.needs_grad && matches!(node.op, Op::Leaf) => {
                    Some(node.value.zeros_like())
                }
                None => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let ta = self.value(*a);
                let tb = self.value(*b);
                let (m, k) = (ta.shape()[0], ta.shape()[1]);
                let n = tb.shape()[1];
                if self.ng(*a) {
                    gemm_nt(g, tb.data(), self.acc(grads, *a), m, n, k);
                }
                if self.ng(*b) {
                    gemm_tn(ta.data(), g, self.acc(grads, *b), m, k, n);
                }
            }
            Op::MatMulNt(a, b) => {
                let ta = self.value(*a);
                let tb = self.value(*b);
                let (m, k) = (ta.shape()[0], ta.shape()[1]);
                let n = tb.shape()[0];
                if self.ng(*a) {
                    gemm_nn(g, tb.data(), self.acc(grads, *a), m, n, k);
                }
                if self.ng(*b) {
                    gemm_tn(g, ta.data(), self.acc(grads, *b), m, n, k);
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.ng(v) {
                        add_into(self.acc(grads, v), g);
                    }
                }
            }
            Op::AddRow(a, r) => {
                if self.ng(*a) {
                    add_into(self.acc(grads, *a), g);
                }
                if self.ng(*r) {
                    let dst = self.acc(grads, *r);
                    let n = dst.len();
                    for chunk in g.chunks(n) {
                        add_into(dst, chunk);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.ng(*a) {
                    let dst = self.acc(grads, *a);
                    for ((d, gi), y) in dst.iter_mut().zip(g).zip(tb.data()) {
                        *d += gi * y;
                    }
                }
                if self.ng(*b) {
                    let dst = self.acc(grads, *b);
                    for ((d, gi), x) in dst.iter_mut().zip(g).zip(ta.data()) {
                        *d += gi * x;
                    }
                }
            }
            Op::MulCol(a, c) => {
                let (ta, tc) = (self.value(*a), self.value(*c));
                let n = ta.cols();
                if self.ng(*a) {
                    let dst = self.acc(grads, *a);
                    for ((drow, grow), s) in dst.chunks_mut(n).zip(g.chunks(n)).zip(tc.data()) {
                        for (d, gi) in drow.iter_mut().zip(grow) {
                            *d += gi * s;
                        }
                    }
                }
                if self.ng(*c) {
                    let dst = self.acc(grads, *c);
                    for (i, d) in dst.iter_mut().enumerate() {
                        *d += dot(&g[i * n..(i + 1) * n], ta.row(i));
                    }
                }
            }
            Op::Affine(a, s) => {
                if self.ng(*a) {
                    for (d, gi) in self.acc(grads, *a).iter_mut().zip(g) {
                        *d += s * gi;
                    }
                }
            }
            Op::Tanh(a) => {
                if self.ng(*a) {
                    let dst = self.acc(grads, *a);
                    for ((d, gi), y) in dst.iter_mut().zip(g).zip(out.data()) {
                        *d += gi * (1.0 - y * y);
                    }
                }
            }
            Op::Relu(a) => {
                if self.ng(*a) {
                    let x = self.value(*a).data();
                    let dst = self.acc(grads, *a);
                    for ((d, gi), xi) in dst.iter_mut().zip(g).zip(x) {
                        if *xi > 0.0 {
                            *d += gi;
                        }
                    }
                }
            }
            Op::Softmax(a) => {
                if self.ng(*a) {
                    let n = out.cols();
                    let dst = self.acc(grads, *a);
                    for ((drow, grow), yrow) in dst
                        .chunks_mut(n)
                        .zip(g.chunks(n))
                        .zip(out.data().chunks(n))
                    {
                        let gy = dot(grow, yrow);
                        for ((d, gi), y) in drow.iter_mut().zip(grow).zip(yrow) {
                            *d += y * (gi - gy);
                        }
                    }
                }
            }
            Op::Concat(parts, axis) => {
                if out.ndim() == 1 || *axis == 0 {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        if self.ng(p) {
                            add_into(self.acc(grads, p), &g[offset..offset + len]);
                        }
                        offset += len;
                    }
                } else {
                    let total = out.cols();
                    let mut col = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        if self.ng(p) {
                            let dst = self.acc(grads, p);
                            for (r, drow) in dst.chunks_mut(w).enumerate() {
                                add_into(drow, &g[r * total + col..r * total + col + w]);
                            }
                        }
                        col += w;
                    }
                }
            }
            Op::Sum(a) => {
                if self.ng(*a) {
                    for d in self.acc(grads, *a).iter_mut() {
                        *d += g[0];
                    }
                }
            }
            Op::RowSums(a) => {
                if self.ng(*a) {
                    let n = self.value(*a).cols();
                    let dst = self.acc(grads, *a);
                    for (drow, gi) in dst.chunks_mut(n).zip(g) {
                        for d in drow.iter_mut() {
                            *d += gi;
                        }
                    }
                }
            }
            Op::GatherRows(a, idx) => {
                if self.ng(*a) {
                    let n = out.cols();
                    let dst = self.acc(grads, *a);
                    for (k, &i) in idx.iter().enumerate() {
                        add_into(&mut dst[i * n..(i + 1) * n], &g[k * n..(k + 1) * n]);
                    }
                }
            }
            Op::PairwiseAdd(a, c) => {
                let n = out.cols();
                let mc = self.value(*c).rows();
                if self.ng(*a) {
                    let dst = self.acc(grads, *a);
                    for (k, grow) in g.chunks(n).enumerate() {
                        let i = k / mc;
                        add_into(&mut dst[i * n..(i + 1) * n], grow);
                    }
                }
                if self.ng(*c) {
                    let dst = self.acc(grads, *c);
                    for (k, grow) in g.chunks(n).enumerate() {
                        let j = k % mc;
                        add_into(&mut dst[j * n..(j + 1) * n], grow);
                    }
                }
            }
            Op::CosineRows { a, b, na, nb } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let n = ta.cols();
                let bcast = tb.rows() == 1;
                let cos = out.data();
                // d cos / d a = b/(|a||b|) - cos * a/|a|^2, symmetric for b.
                let mut ga = if self.ng(*a) { Some(vec![0.0; ta.len()]) } else { None };
                let mut gb = if self.ng(*b) { Some(vec![0.0; tb.len()]) } else { None };
                for i in 0..ta.rows() {
                    let jb = if bcast { 0 } else { i };
                    let (ra, rb) = (ta.row(i), tb.row(jb));
                    let (x, y) = (na[i], nb[jb]);
                    let gi = g[i];
                    if let Some(ga) = ga.as_mut() {
                        for ((d, av), bv) in ga[i * n..(i + 1) * n].iter_mut().zip(ra).zip(rb) {
                            *d += gi * (bv / (x * y) - cos[i] * av / (x * x));
                        }
                    }
                    if let Some(gb) = gb.as_mut() {
                        for ((d, av), bv) in gb[jb * n..(jb + 1) * n].iter_mut().zip(ra).zip(rb) {
                            *d += gi * (av / (x * y) - cos[i] * bv / (y * y));
                        }
                    }
                }
                if let Some(ga) = ga {
                    add_into(self.acc(grads, *a), &ga);
                }
                if let Some(gb) = gb {
                    add_into(self.acc(grads, *b), &gb);
                }
            }
            Op::SoftmaxXent {
                logits,
                labels,
                probs,
            } => {
                if self.ng(*logits) {
                    let n = self.value(*logits).cols();
                    let scale = g[0] / labels.len() as f64;
                    let dst = self.acc(grads, *logits);
                    for (r, (drow, prow)) in dst.chunks_mut(n).zip(probs.chunks(n)).enumerate() {
                        for (j, (d, p)) in drow.iter_mut().zip(prow).enumerate() {
                            let y = if j == labels[r] { 1.0 } else { 0.0 };
                            *d += scale * (p - y);
                        }
                    }
                }
            }
            Op::BceLogits { logits, targets } => {
                if self.ng(*logits) {
                    let z = self.value(*logits).data();
                    let scale = g[0] / targets.len() as f64;
                    let dst = self.acc(grads, *logits);
                    for ((d, zi), y) in dst.iter_mut().zip(z).zip(targets) {
                        *d += scale * (sigmoid(*zi) - y);
                    }
                }
            }
        }
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> &'g mut Vec<f64> {
        let len = self.value(v).len();
        grads[v.0].get_or_insert_with(|| vec![0.0; len])
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
