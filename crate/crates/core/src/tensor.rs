//! Reverse-mode automatic differentiation on flat `f64` buffers.
//!
//! A [`Tape`] is a define-by-run arena: every op appends its output buffer as
//! a node and records how to push gradients back to its inputs. [`backward`]
//! replays the recorded ops exactly once, in reverse order, accumulating into
//! per-node gradient slots. [`Var`] is a plain index into the arena, cheap to
//! copy and safe to hold across ops.
//!
//! Tensors are rank-1 or rank-2, row-major. Column vectors (`[n, 1]`) are the
//! working shape throughout the model code; rank-1 `[n]` is accepted wherever
//! a shape is "vector-like" (at most one dimension greater than one).
//!
//! [`backward`]: Tape::backward

use thiserror::Error;

/// Additive smoothing inside `cross_entropy`'s log, guarding −log 0.
pub const CE_EPSILON: f64 = 1e-12;

// ── Errors ──────────────────────────────────────────────────────────────────

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("{op}: operand shapes {lhs:?} and {rhs:?} are incompatible")]
    Mismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("{op}: expected a matrix, got shape {shape:?}")]
    NotMatrix { op: &'static str, shape: Vec<usize> },
    #[error("{op}: expected a vector-like shape, got {shape:?}")]
    NotVector { op: &'static str, shape: Vec<usize> },
    #[error("{op}: axis {axis} out of range for rank {rank}")]
    BadAxis { op: &'static str, axis: usize, rank: usize },
    #[error("{op}: index {index} out of range (size {bound})")]
    IndexOutOfRange { op: &'static str, index: usize, bound: usize },
    #[error("{op}: no operands")]
    Empty { op: &'static str },
    #[error("tensor shape {shape:?} has a zero dimension or does not match {len} values")]
    BadTensor { shape: Vec<usize>, len: usize },
    #[error("backward: loss must hold a single value, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("backward: tape already consumed; build a fresh tape per pass")]
    BackwardConsumed,
}

// ── Tensor ──────────────────────────────────────────────────────────────────

/// A host-side tensor: values, shape, and (after a backward pass) a gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, ShapeError> {
        let n: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || n != values.len() {
            return Err(ShapeError::BadTensor { shape, len: values.len() });
        }
        Ok(Tensor { shape, values, grad: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, values: vec![0.0; n], grad: None }
    }

    pub fn filled(shape: Vec<usize>, v: f64) -> Self {
        let n = shape.iter().product();
        Tensor { shape, values: vec![v; n], grad: None }
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    /// Row `i` of a matrix, as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.shape[1];
        &self.values[i * cols..(i + 1) * cols]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

// ── Tape ────────────────────────────────────────────────────────────────────

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

struct Node {
    shape: Vec<usize>,
    values: Vec<f64>,
}

enum Op {
    Matmul { a: usize, b: usize, out: usize },
    Add { a: usize, b: usize, out: usize },
    Sub { a: usize, b: usize, out: usize },
    Mul { a: usize, b: usize, out: usize },
    Tanh { a: usize, out: usize },
    Sigmoid { a: usize, out: usize },
    Concat { parts: Vec<usize>, axis: usize, out: usize },
    Transpose { a: usize, out: usize },
    Softmax { a: usize, out: usize },
    CrossEntropy { dist: usize, target: usize, out: usize },
    Row { table: usize, index: usize, out: usize },
    Sum { a: usize, out: usize },
    Scale { a: usize, k: f64, out: usize },
}

/// Define-by-run gradient tape. One forward pass, one backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    ops: Vec<Op>,
    grads: Vec<Option<Vec<f64>>>,
    consumed: bool,
}

/// `Some(n)` when at most one dimension exceeds 1 (rank ≤ 2), with n = numel.
fn vector_len(shape: &[usize]) -> Option<usize> {
    if shape.len() > 2 || shape.iter().filter(|&&d| d > 1).count() > 1 {
        return None;
    }
    Some(shape.iter().product())
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, shape: Vec<usize>, values: Vec<f64>) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.nodes.push(Node { shape, values });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    // ── Leaves and accessors ──

    /// Copy a tensor's values onto the tape as a leaf.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape.clone(), t.values.clone())
    }

    pub fn leaf_values(&mut self, shape: &[usize], values: Vec<f64>) -> Result<Var, ShapeError> {
        let n: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || n != values.len() {
            return Err(ShapeError::BadTensor { shape: shape.to_vec(), len: values.len() });
        }
        Ok(self.push(shape.to_vec(), values))
    }

    /// A `[1]`-shaped constant.
    pub fn scalar(&mut self, v: f64) -> Var {
        self.push(vec![1], vec![v])
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].values
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// Scalar convenience: the single value of a `[1]`-like node.
    pub fn item(&self, v: Var) -> f64 {
        debug_assert_eq!(self.nodes[v.0].values.len(), 1);
        self.nodes[v.0].values[0]
    }

    /// Gradient of a node, if backward reached it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    /// Gradient of a node, zeros when backward never reached it.
    pub fn grad_or_zeros(&self, v: Var) -> Vec<f64> {
        self.grads[v.0].clone().unwrap_or_else(|| vec![0.0; self.nodes[v.0].values.len()])
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    // ── Matrix ops ──

    /// `a (m×k) · b (k×n) → (m×n)`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 {
            return Err(ShapeError::NotMatrix { op: "matmul", shape: sa.clone() });
        }
        if sb.len() != 2 {
            return Err(ShapeError::NotMatrix { op: "matmul", shape: sb.clone() });
        }
        if sa[1] != sb[0] {
            return Err(ShapeError::Mismatch { op: "matmul", lhs: sa.clone(), rhs: sb.clone() });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        {
            let av = &self.nodes[a.0].values;
            let bv = &self.nodes[b.0].values;
            matmul_into(av, bv, &mut out, m, k, n);
        }
        let v = self.push(vec![m, n], out);
        self.ops.push(Op::Matmul { a: a.0, b: b.0, out: v.0 });
        Ok(v)
    }

    /// Transpose of a matrix.
    pub fn transpose(&mut self, a: Var) -> Result<Var, ShapeError> {
        let sa = &self.nodes[a.0].shape;
        if sa.len() != 2 {
            return Err(ShapeError::NotMatrix { op: "transpose", shape: sa.clone() });
        }
        let (m, n) = (sa[0], sa[1]);
        let av = &self.nodes[a.0].values;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = av[i * n + j];
            }
        }
        let v = self.push(vec![n, m], out);
        self.ops.push(Op::Transpose { a: a.0, out: v.0 });
        Ok(v)
    }

    // ── Elementwise ops ──

    fn binary(&mut self, op: &'static str, a: Var, b: Var) -> Result<(), ShapeError> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa != sb {
            return Err(ShapeError::Mismatch { op, lhs: sa.clone(), rhs: sb.clone() });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        self.binary("add", a, b)?;
        let vals: Vec<f64> =
            self.nodes[a.0].values.iter().zip(&self.nodes[b.0].values).map(|(x, y)| x + y).collect();
        let v = self.push(self.nodes[a.0].shape.clone(), vals);
        self.ops.push(Op::Add { a: a.0, b: b.0, out: v.0 });
        Ok(v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        self.binary("sub", a, b)?;
        let vals: Vec<f64> =
            self.nodes[a.0].values.iter().zip(&self.nodes[b.0].values).map(|(x, y)| x - y).collect();
        let v = self.push(self.nodes[a.0].shape.clone(), vals);
        self.ops.push(Op::Sub { a: a.0, b: b.0, out: v.0 });
        Ok(v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        self.binary("mul", a, b)?;
        let vals: Vec<f64> =
            self.nodes[a.0].values.iter().zip(&self.nodes[b.0].values).map(|(x, y)| x * y).collect();
        let v = self.push(self.nodes[a.0].shape.clone(), vals);
        self.ops.push(Op::Mul { a: a.0, b: b.0, out: v.0 });
        Ok(v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let vals: Vec<f64> = self.nodes[a.0].values.iter().map(|x| x.tanh()).collect();
        let v = self.push(self.nodes[a.0].shape.clone(), vals);
        self.ops.push(Op::Tanh { a: a.0, out: v.0 });
        v
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let vals: Vec<f64> =
            self.nodes[a.0].values.iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect();
        let v = self.push(self.nodes[a.0].shape.clone(), vals);
        self.ops.push(Op::Sigmoid { a: a.0, out: v.0 });
        v
    }

    /// Multiply every entry by the constant `k`.
    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let vals: Vec<f64> = self.nodes[a.0].values.iter().map(|x| x * k).collect();
        let v = self.push(self.nodes[a.0].shape.clone(), vals);
        self.ops.push(Op::Scale { a: a.0, k, out: v.0 });
        v
    }

    /// Sum all entries into a `[1]` scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.nodes[a.0].values.iter().sum();
        let v = self.push(vec![1], vec![s]);
        self.ops.push(Op::Sum { a: a.0, out: v.0 });
        v
    }

    // ── Structure ops ──

    /// Concatenate along `axis` (0 or 1). Rank-1 inputs concatenate on axis 0.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, ShapeError> {
        if parts.is_empty() {
            return Err(ShapeError::Empty { op: "concat" });
        }
        let rank = self.nodes[parts[0].0].shape.len();
        if axis >= rank {
            return Err(ShapeError::BadAxis { op: "concat", axis, rank });
        }
        let first = self.nodes[parts[0].0].shape.clone();
        for p in parts {
            let s = &self.nodes[p.0].shape;
            let compatible = s.len() == rank
                && s.iter().zip(&first).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(ShapeError::Mismatch { op: "concat", lhs: first, rhs: s.clone() });
            }
        }
        let (shape, values) = if rank == 1 || axis == 0 {
            // Row-major: axis-0 concat is a straight buffer append.
            let mut shape = first.clone();
            shape[0] = parts.iter().map(|p| self.nodes[p.0].shape[0]).sum();
            let mut values = Vec::with_capacity(shape.iter().product());
            for p in parts {
                values.extend_from_slice(&self.nodes[p.0].values);
            }
            (shape, values)
        } else {
            let rows = first[0];
            let total_cols: usize = parts.iter().map(|p| self.nodes[p.0].shape[1]).sum();
            let mut values = Vec::with_capacity(rows * total_cols);
            for r in 0..rows {
                for p in parts {
                    let cols = self.nodes[p.0].shape[1];
                    let vals = &self.nodes[p.0].values;
                    values.extend_from_slice(&vals[r * cols..(r + 1) * cols]);
                }
            }
            (vec![rows, total_cols], values)
        };
        let v = self.push(shape, values);
        self.ops.push(Op::Concat { parts: parts.iter().map(|p| p.0).collect(), axis, out: v.0 });
        Ok(v)
    }

    /// Row `index` of a matrix, as a column vector `[cols, 1]`.
    ///
    /// The usual embedding lookup; backward scatter-adds into the table row.
    pub fn row(&mut self, table: Var, index: usize) -> Result<Var, ShapeError> {
        let s = &self.nodes[table.0].shape;
        if s.len() != 2 {
            return Err(ShapeError::NotMatrix { op: "row", shape: s.clone() });
        }
        let (rows, cols) = (s[0], s[1]);
        if index >= rows {
            return Err(ShapeError::IndexOutOfRange { op: "row", index, bound: rows });
        }
        let vals = self.nodes[table.0].values[index * cols..(index + 1) * cols].to_vec();
        let v = self.push(vec![cols, 1], vals);
        self.ops.push(Op::Row { table: table.0, index, out: v.0 });
        Ok(v)
    }

    // ── Probability ops ──

    /// Softmax over a vector-like input, with max subtraction for stability.
    pub fn softmax(&mut self, a: Var) -> Result<Var, ShapeError> {
        let shape = self.nodes[a.0].shape.clone();
        if vector_len(&shape).is_none() {
            return Err(ShapeError::NotVector { op: "softmax", shape });
        }
        let xs = &self.nodes[a.0].values;
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let vals: Vec<f64> = exps.iter().map(|e| e / z).collect();
        let v = self.push(shape, vals);
        self.ops.push(Op::Softmax { a: a.0, out: v.0 });
        Ok(v)
    }

    /// `−log(dist[target] + ε)` for a probability vector, as a `[1]` scalar.
    pub fn cross_entropy(&mut self, dist: Var, target: usize) -> Result<Var, ShapeError> {
        let shape = self.nodes[dist.0].shape.clone();
        let Some(n) = vector_len(&shape) else {
            return Err(ShapeError::NotVector { op: "cross_entropy", shape });
        };
        if target >= n {
            return Err(ShapeError::IndexOutOfRange { op: "cross_entropy", index: target, bound: n });
        }
        let p = self.nodes[dist.0].values[target];
        let v = self.push(vec![1], vec![-(p + CE_EPSILON).ln()]);
        self.ops.push(Op::CrossEntropy { dist: dist.0, target, out: v.0 });
        Ok(v)
    }

    // ── Backward ──

    /// Reverse sweep from `loss` (which must hold a single value).
    ///
    /// Visits each recorded op exactly once, in reverse order, accumulating
    /// gradients into per-node slots. A tape can be swept once; build a fresh
    /// tape for the next pass.
    pub fn backward(&mut self, loss: Var) -> Result<(), ShapeError> {
        if self.consumed {
            return Err(ShapeError::BackwardConsumed);
        }
        if self.nodes[loss.0].values.len() != 1 {
            return Err(ShapeError::NonScalarLoss { shape: self.nodes[loss.0].shape.clone() });
        }
        self.consumed = true;
        self.grads[loss.0] = Some(vec![1.0]);

        // The op list is only ever replayed once; detach it so the sweep can
        // mutate gradient slots freely.
        let ops = std::mem::take(&mut self.ops);
        for op in ops.iter().rev() {
            let out = op_out(op);
            let Some(g) = self.grads[out].clone() else { continue };
            match op {
                Op::Matmul { a, b, out: _ } => {
                    let (m, k) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                    let n = self.nodes[*b].shape[1];
                    // dA = G·Bᵀ
                    let bv = &self.nodes[*b].values;
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for j in 0..n {
                            let gij = g[i * n + j];
                            if gij == 0.0 {
                                continue;
                            }
                            for p in 0..k {
                                da[i * k + p] += gij * bv[p * n + j];
                            }
                        }
                    }
                    // dB = Aᵀ·G
                    let av = &self.nodes[*a].values;
                    let mut db = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let aip = av[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                db[p * n + j] += aip * g[i * n + j];
                            }
                        }
                    }
                    self.accumulate(*a, &da);
                    self.accumulate(*b, &db);
                }
                Op::Add { a, b, out: _ } => {
                    self.accumulate(*a, &g);
                    self.accumulate(*b, &g);
                }
                Op::Sub { a, b, out: _ } => {
                    self.accumulate(*a, &g);
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    self.accumulate(*b, &neg);
                }
                Op::Mul { a, b, out: _ } => {
                    let da: Vec<f64> =
                        g.iter().zip(&self.nodes[*b].values).map(|(gi, bi)| gi * bi).collect();
                    let db: Vec<f64> =
                        g.iter().zip(&self.nodes[*a].values).map(|(gi, ai)| gi * ai).collect();
                    self.accumulate(*a, &da);
                    self.accumulate(*b, &db);
                }
                Op::Tanh { a, out } => {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[*out].values)
                        .map(|(gi, yi)| gi * (1.0 - yi * yi))
                        .collect();
                    self.accumulate(*a, &da);
                }
                Op::Sigmoid { a, out } => {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[*out].values)
                        .map(|(gi, yi)| gi * yi * (1.0 - yi))
                        .collect();
                    self.accumulate(*a, &da);
                }
                Op::Concat { parts, axis, out } => {
                    let (parts, out) = (parts.clone(), *out);
                    let rank = self.nodes[out].shape.len();
                    if rank == 1 || *axis == 0 {
                        let mut offset = 0;
                        for p in parts {
                            let len = self.nodes[p].values.len();
                            let slice = g[offset..offset + len].to_vec();
                            self.accumulate(p, &slice);
                            offset += len;
                        }
                    } else {
                        let rows = self.nodes[out].shape[0];
                        let total_cols = self.nodes[out].shape[1];
                        let mut col_offset = 0;
                        for p in parts {
                            let cols = self.nodes[p].shape[1];
                            let mut dp = vec![0.0; rows * cols];
                            for r in 0..rows {
                                for c in 0..cols {
                                    dp[r * cols + c] = g[r * total_cols + col_offset + c];
                                }
                            }
                            self.accumulate(p, &dp);
                            col_offset += cols;
                        }
                    }
                }
                Op::Transpose { a, out: _ } => {
                    let (m, n) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                    let mut da = vec![0.0; m * n];
                    for i in 0..m {
                        for j in 0..n {
                            da[i * n + j] = g[j * m + i];
                        }
                    }
                    self.accumulate(*a, &da);
                }
                Op::Softmax { a, out } => {
                    let y = &self.nodes[*out].values;
                    let dot: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                    let da: Vec<f64> = g.iter().zip(y).map(|(gi, yi)| yi * (gi - dot)).collect();
                    self.accumulate(*a, &da);
                }
                Op::CrossEntropy { dist, target, out: _ } => {
                    let p = self.nodes[*dist].values[*target];
                    let mut da = vec![0.0; self.nodes[*dist].values.len()];
                    da[*target] = -g[0] / (p + CE_EPSILON);
                    self.accumulate(*dist, &da);
                }
                Op::Row { table, index, out: _ } => {
                    let cols = self.nodes[*table].shape[1];
                    let len = self.nodes[*table].values.len();
                    let (table, index) = (*table, *index);
                    let slot = self.grads[table].get_or_insert_with(|| vec![0.0; len]);
                    for (c, gi) in g.iter().enumerate() {
                        slot[index * cols + c] += gi;
                    }
                }
                Op::Sum { a, out: _ } => {
                    let da = vec![g[0]; self.nodes[*a].values.len()];
                    self.accumulate(*a, &da);
                }
                Op::Scale { a, k, out: _ } => {
                    let k = *k;
                    let da: Vec<f64> = g.iter().map(|gi| gi * k).collect();
                    self.accumulate(*a, &da);
                }
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, node: usize, contribution: &[f64]) {
        let len = self.nodes[node].values.len();
        debug_assert_eq!(len, contribution.len());
        let slot = self.grads[node].get_or_insert_with(|| vec![0.0; len]);
        for (s, c) in slot.iter_mut().zip(contribution) {
            *s += c;
        }
    }
}

fn op_out(op: &Op) -> usize {
    match op {
        Op::Matmul { out, .. }
        | Op::Add { out, .. }
        | Op::Sub { out, .. }
        | Op::Mul { out, .. }
        | Op::Tanh { out, .. }
        | Op::Sigmoid { out, .. }
        | Op::Concat { out, .. }
        | Op::Transpose { out, .. }
        | Op::Softmax { out, .. }
        | Op::CrossEntropy { out, .. }
        | Op::Row { out, .. }
        | Op::Sum { out, .. }
        | Op::Scale { out, .. } => *out,
    }
}

/// `out += a (m×k) · b (k×n)`, naive but cache-friendly (i, p, j order).
fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += aip * brow[j];
            }
        }
    }
}

// ── Tests ───────────────────────────────────────────────────────────────────
