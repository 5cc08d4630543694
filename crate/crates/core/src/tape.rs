//! Reverse-mode autodiff on a Wengert tape.
//!
//! Operations append nodes in execution order, so every node's inputs sit at
//! strictly smaller indices and the reverse sweep is already topologically
//! ordered. Gradient accumulation is additive across fan-out. Reductions run
//! in fixed index order, which makes every forward and backward bit
//! reproducible for a given input.
//!
//! A [`Var`] is only meaningful on the tape that produced it. Tapes are cheap
//! to build and are meant to be dropped and rebuilt every training step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Per-feature running statistics for batch normalization.
///
/// Training-mode forwards update the running mean and variance with the
/// stored momentum; evaluation-mode forwards read them and leave them
/// untouched. Variance is the biased batch variance.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BnState<S: Scalar = f64> {
    pub running_mean: Vec<S>,
    pub running_var: Vec<S>,
    pub momentum: S,
    pub eps: S,
}

impl<S: Scalar> BnState<S> {
    /// Fresh state: zero mean, unit variance, momentum 0.9, eps 1e-5.
    pub fn new(dim: usize) -> Self {
        BnState {
            running_mean: vec![S::zero(); dim],
            running_var: vec![S::one(); dim],
            momentum: S::of(0.9),
            eps: S::of(1e-5),
        }
    }

    pub fn dim(&self) -> usize {
        self.running_mean.len()
    }
}

enum Op<S: Scalar> {
    Leaf,
    MatMul { a: Var, b: Var },
    Add { a: Var, b: Var },
    AddBias { x: Var, bias: Var },
    Relu { x: Var },
    Affine { x: Var, mul: S },
    Sum { x: Var },
    Row { x: Var, index: usize },
    Cosine { a: Var, b: Var },
    SoftmaxBlocks { x: Var, block: usize, tau: S },
    LogSumExp { x: Var },
    CrossEntropyMean { logits: Var, labels: Vec<usize> },
    BatchNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<S>, inv_std: Vec<S>, training: bool },
    ConcatScalars { parts: Vec<Var> },
}

struct Node<S: Scalar> {
    value: Tensor<S>,
    grad: Option<Vec<S>>,
    op: Op<S>,
}

pub struct Tape<S: Scalar = f64> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input node holding a copy of `t`'s values.
    pub fn leaf(&mut self, t: &Tensor<S>) -> Var {
        self.push(t.clone(), Op::Leaf)
    }

    /// Forward values at `v`.
    ///
    /// Panics if `v` does not belong to this tape; vars are never shared
    /// across tapes.
    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    /// Gradient at `v`, present once a backward sweep has reached it.
    ///
    /// Panics if `v` does not belong to this tape.
    pub fn grad(&self, v: Var) -> Option<&[S]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// Accumulates the gradient at `v` into the tensor's gradient slot.
    pub fn write_grad(&self, v: Var, into: &mut Tensor<S>) -> Result<()> {
        let g = self
            .grad(v)
            .ok_or_else(|| Error::contract("no gradient at this var; run backward first"))?;
        into.accumulate_grad(g)
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Var {
        self.nodes.push(Node { value, grad: None, op });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 >= self.nodes.len() {
            return Err(Error::contract(format!("var {} is not on this tape", v.0)));
        }
        Ok(())
    }

    // ── forward ops ─────────────────────────────────────────────────────

    /// `C = A · B` for `[m×k] · [k×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (m, k) = self.nodes[a.0].value.dims2()?;
        let (k2, n) = self.nodes[b.0].value.dims2()?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("inner dims {k} vs {k2}")));
        }
        let out = matmul_values(
            self.nodes[a.0].value.data(),
            (m, k),
            self.nodes[b.0].value.data(),
            n,
        );
        check_finite("matmul", &out)?;
        Ok(self.push(Tensor::new([m, n], out)?, Op::MatMul { a, b }))
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        if self.nodes[a.0].value.shape() != self.nodes[b.0].value.shape() {
            return Err(Error::shape(
                "add",
                format!(
                    "{:?} vs {:?}",
                    self.nodes[a.0].value.shape(),
                    self.nodes[b.0].value.shape()
                ),
            ));
        }
        let data: Vec<S> = self.nodes[a.0]
            .value
            .data()
            .iter()
            .zip(self.nodes[b.0].value.data())
            .map(|(&x, &y)| x + y)
            .collect();
        check_finite("add", &data)?;
        let shape = self.nodes[a.0].value.shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::Add { a, b }))
    }

    /// Adds a `[c]` bias row to every row of a `[r×c]` tensor.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        self.check(x)?;
        self.check(bias)?;
        let (r, c) = self.nodes[x.0].value.dims2()?;
        if self.nodes[bias.0].value.shape() != [c] {
            return Err(Error::shape(
                "add_bias",
                format!("bias {:?} for width {c}", self.nodes[bias.0].value.shape()),
            ));
        }
        let xs = self.nodes[x.0].value.data();
        let bs = self.nodes[bias.0].value.data();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(xs[i * c + j] + bs[j]);
            }
        }
        check_finite("add_bias", &data)?;
        Ok(self.push(Tensor::new([r, c], data)?, Op::AddBias { x, bias }))
    }

    /// Elementwise rectifier. The subgradient at zero is zero.
    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let data: Vec<S> =
            self.nodes[x.0].value.data().iter().map(|&v| v.max(S::zero())).collect();
        let shape = self.nodes[x.0].value.shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::Relu { x }))
    }

    /// Elementwise `mul * x + add` with finite constants.
    pub fn affine(&mut self, x: Var, mul: S, add: S) -> Result<Var> {
        self.check(x)?;
        if !mul.is_finite() || !add.is_finite() {
            return Err(Error::param("affine constants must be finite"));
        }
        let data: Vec<S> =
            self.nodes[x.0].value.data().iter().map(|&v| mul * v + add).collect();
        let shape = self.nodes[x.0].value.shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::Affine { x, mul }))
    }

    /// Sum of all entries, as a `[1]` tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let s: S = self.nodes[x.0].value.data().iter().copied().sum();
        Ok(self.push(Tensor::scalar(s), Op::Sum { x }))
    }

    /// Row `index` of a rank-2 tensor, as a `[c]` vector.
    pub fn row(&mut self, x: Var, index: usize) -> Result<Var> {
        self.check(x)?;
        let (r, c) = self.nodes[x.0].value.dims2()?;
        if index >= r {
            return Err(Error::shape("row", format!("row {index} out of {r}")));
        }
        let data = self.nodes[x.0].value.data()[index * c..(index + 1) * c].to_vec();
        Ok(self.push(Tensor::new([c], data)?, Op::Row { x, index }))
    }

    /// Cosine similarity of two same-length vectors, as a `[1]` tensor.
    ///
    /// Differentiable in both arguments. Zero-norm inputs are rejected.
    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let av = self.nodes[a.0].value.data();
        let bv = self.nodes[b.0].value.data();
        if self.nodes[a.0].value.shape().len() != 1
            || self.nodes[a.0].value.shape() != self.nodes[b.0].value.shape()
        {
            return Err(Error::shape(
                "cosine",
                format!(
                    "expected equal-length vectors, got {:?} and {:?}",
                    self.nodes[a.0].value.shape(),
                    self.nodes[b.0].value.shape()
                ),
            ));
        }
        let c = cosine_values(av, bv)?;
        check_finite("cosine", &[c])?;
        Ok(self.push(Tensor::scalar(c), Op::Cosine { a, b }))
    }

    /// Temperature softmax over contiguous blocks of length `block`.
    ///
    /// Each block of the row-major data is scaled by `1/tau` and normalized
    /// with max subtraction, so any positive temperature is safe. Requires
    /// the element count to be a multiple of `block`.
    pub fn softmax_blocks(&mut self, x: Var, block: usize, tau: S) -> Result<Var> {
        self.check(x)?;
        let xs = self.nodes[x.0].value.data();
        let data = softmax_blocks_values(xs, block, tau)?;
        let shape = self.nodes[x.0].value.shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::SoftmaxBlocks { x, block, tau }))
    }

    /// `log(sum(exp(x)))` of a vector, as a `[1]` tensor.
    pub fn log_sum_exp(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        if self.nodes[x.0].value.shape().len() != 1 {
            return Err(Error::shape(
                "log_sum_exp",
                format!("expected a vector, got {:?}", self.nodes[x.0].value.shape()),
            ));
        }
        let v = log_sum_exp_values(self.nodes[x.0].value.data());
        Ok(self.push(Tensor::scalar(v), Op::LogSumExp { x }))
    }

    /// Mean softmax cross-entropy of `[B×C]` logits against class labels.
    ///
    /// Computed as `logsumexp(row) - row[label]` per row, which never forms
    /// the probabilities and therefore stays finite for any finite logits.
    pub fn cross_entropy_mean(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        self.check(logits)?;
        let (b, c) = self.nodes[logits.0].value.dims2()?;
        if labels.len() != b {
            return Err(Error::shape(
                "cross_entropy_mean",
                format!("{} labels for {b} rows", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::param(format!("label {bad} out of range for {c} classes")));
        }
        let xs = self.nodes[logits.0].value.data();
        let mut total = S::zero();
        for (i, &y) in labels.iter().enumerate() {
            let rowv = &xs[i * c..(i + 1) * c];
            total = total + log_sum_exp_values(rowv) - rowv[y];
        }
        let loss = total / S::of(b as f64);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropyMean { logits, labels: labels.to_vec() },
        ))
    }

    /// Batch normalization of `[B×d]` with per-feature affine parameters.
    ///
    /// Training mode normalizes by batch statistics (requires `B >= 2`) and
    /// updates the running statistics in `state` as a forward side effect.
    /// Evaluation mode normalizes by the running statistics and leaves
    /// `state` untouched.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        state: &mut BnState<S>,
        training: bool,
    ) -> Result<Var> {
        self.check(x)?;
        self.check(gamma)?;
        self.check(beta)?;
        let (b, d) = self.nodes[x.0].value.dims2()?;
        if self.nodes[gamma.0].value.shape() != [d] || self.nodes[beta.0].value.shape() != [d] {
            return Err(Error::shape("batch_norm", format!("affine params must be [{d}]")));
        }
        if state.dim() != d {
            return Err(Error::shape("batch_norm", format!("state dim {} for width {d}", state.dim())));
        }
        if training && b < 2 {
            return Err(Error::param("batch_norm training mode needs a batch of at least 2"));
        }
        let xs = self.nodes[x.0].value.data();
        let gs = self.nodes[gamma.0].value.data();
        let bs = self.nodes[beta.0].value.data();

        let bn = S::of(b as f64);
        let mut xhat = vec![S::zero(); b * d];
        let mut inv_std = vec![S::zero(); d];
        let mut out = vec![S::zero(); b * d];
        for j in 0..d {
            let (mean, var) = if training {
                let mut m = S::zero();
                for i in 0..b {
                    m = m + xs[i * d + j];
                }
                m = m / bn;
                let mut v = S::zero();
                for i in 0..b {
                    let diff = xs[i * d + j] - m;
                    v = v + diff * diff;
                }
                (m, v / bn)
            } else {
                (state.running_mean[j], state.running_var[j])
            };
            let is = (var + state.eps).sqrt().recip();
            inv_std[j] = is;
            for i in 0..b {
                let xh = (xs[i * d + j] - mean) * is;
                xhat[i * d + j] = xh;
                out[i * d + j] = gs[j] * xh + bs[j];
            }
            if training {
                let m_momentum = state.momentum;
                state.running_mean[j] =
                    m_momentum * state.running_mean[j] + (S::one() - m_momentum) * mean;
                state.running_var[j] =
                    m_momentum * state.running_var[j] + (S::one() - m_momentum) * var;
            }
        }
        check_finite("batch_norm", &out)?;
        Ok(self.push(
            Tensor::new([b, d], out)?,
            Op::BatchNorm { x, gamma, beta, xhat, inv_std, training },
        ))
    }

    /// Stacks `[1]` tensors into a `[k]` vector.
    pub fn concat_scalars(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::empty("concat_scalars needs at least one part"));
        }
        let mut data = Vec::with_capacity(parts.len());
        for &p in parts {
            self.check(p)?;
            data.push(self.nodes[p.0].value.item()?);
        }
        Ok(self.push(Tensor::new([parts.len()], data)?, Op::ConcatScalars { parts: parts.to_vec() }))
    }

    // ── backward ────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar root.
    ///
    /// After it returns, every node that influences the root holds
    /// `d(root)/d(node)` in its gradient slot, with fan-out accumulated
    /// additively. Repeated sweeps keep accumulating; drop the tape to reset.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        self.check(root)?;
        if self.nodes[root.0].value.numel() != 1 {
            return Err(Error::contract(format!(
                "backward root must be scalar, got shape {:?}",
                self.nodes[root.0].value.shape()
            )));
        }
        {
            let node = &mut self.nodes[root.0];
            let g = node.grad.get_or_insert_with(|| vec![S::zero(); 1]);
            g[0] = g[0] + S::one();
        }
        for i in (0..=root.0).rev() {
            let (head, tail) = self.nodes.split_at_mut(i);
            let node = &tail[0];
            let Some(dy) = node.grad.as_ref() else { continue };
            match &node.op {
                Op::Leaf => {}
                Op::MatMul { a, b } => {
                    let (m, k) = head[a.0].value.dims2()?;
                    let n = head[b.0].value.dims2()?.1;
                    let av = head[a.0].value.data();
                    let bv = head[b.0].value.data();
                    let mut da = vec![S::zero(); m * k];
                    let mut db = vec![S::zero(); k * n];
                    for i2 in 0..m {
                        for j in 0..n {
                            let g = dy[i2 * n + j];
                            if g == S::zero() {
                                continue;
                            }
                            for p in 0..k {
                                da[i2 * k + p] = da[i2 * k + p] + g * bv[p * n + j];
                                db[p * n + j] = db[p * n + j] + g * av[i2 * k + p];
                            }
                        }
                    }
                    add_grad(head, *a, &da);
                    add_grad(head, *b, &db);
                }
                Op::Add { a, b } => {
                    let dy = dy.clone();
                    add_grad(head, *a, &dy);
                    add_grad(head, *b, &dy);
                }
                Op::AddBias { x, bias } => {
                    let (r, c) = head[x.0].value.dims2()?;
                    let mut dbias = vec![S::zero(); c];
                    for i2 in 0..r {
                        for j in 0..c {
                            dbias[j] = dbias[j] + dy[i2 * c + j];
                        }
                    }
                    let dy = dy.clone();
                    add_grad(head, *x, &dy);
                    add_grad(head, *bias, &dbias);
                }
                Op::Relu { x } => {
                    let dx: Vec<S> = head[x.0]
                        .value
                        .data()
                        .iter()
                        .zip(dy)
                        .map(|(&v, &g)| if v > S::zero() { g } else { S::zero() })
                        .collect();
                    add_grad(head, *x, &dx);
                }
                Op::Affine { x, mul } => {
                    let dx: Vec<S> = dy.iter().map(|&g| *mul * g).collect();
                    add_grad(head, *x, &dx);
                }
                Op::Sum { x } => {
                    let g = dy[0];
                    let dx = vec![g; head[x.0].value.numel()];
                    add_grad(head, *x, &dx);
                }
                Op::Row { x, index } => {
                    let (_, c) = head[x.0].value.dims2()?;
                    let mut dx = vec![S::zero(); head[x.0].value.numel()];
                    dx[index * c..(index + 1) * c].copy_from_slice(dy);
                    add_grad(head, *x, &dx);
                }
                Op::Cosine { a, b } => {
                    let av = head[a.0].value.data();
                    let bv = head[b.0].value.data();
                    let na = norm(av);
                    let nb = norm(bv);
                    let dot = dot(av, bv);
                    let c = dot / (na * nb);
                    let g = dy[0];
                    let da: Vec<S> = av
                        .iter()
                        .zip(bv)
                        .map(|(&ai, &bi)| g * (bi / (na * nb) - c * ai / (na * na)))
                        .collect();
                    let db: Vec<S> = av
                        .iter()
                        .zip(bv)
                        .map(|(&ai, &bi)| g * (ai / (na * nb) - c * bi / (nb * nb)))
                        .collect();
                    add_grad(head, *a, &da);
                    add_grad(head, *b, &db);
                }
                Op::SoftmaxBlocks { x, block, tau } => {
                    let y = node.value.data();
                    let mut dx = vec![S::zero(); y.len()];
                    for blk in 0..y.len() / block {
                        let lo = blk * block;
                        let hi = lo + block;
                        let mut s = S::zero();
                        for t in lo..hi {
                            s = s + dy[t] * y[t];
                        }
                        for t in lo..hi {
                            dx[t] = y[t] * (dy[t] - s) / *tau;
                        }
                    }
                    add_grad(head, *x, &dx);
                }
                Op::LogSumExp { x } => {
                    let xs = head[x.0].value.data();
                    let p = softmax_blocks_values(xs, xs.len(), S::one())
                        .expect("forward validated this vector");
                    let g = dy[0];
                    let dx: Vec<S> = p.iter().map(|&pi| g * pi).collect();
                    add_grad(head, *x, &dx);
                }
                Op::CrossEntropyMean { logits, labels } => {
                    let (b, c) = head[logits.0].value.dims2()?;
                    let xs = head[logits.0].value.data();
                    let g = dy[0] / S::of(b as f64);
                    let mut dx = vec![S::zero(); b * c];
                    for (i2, &y2) in labels.iter().enumerate() {
                        let rowv = &xs[i2 * c..(i2 + 1) * c];
                        let p = softmax_blocks_values(rowv, c, S::one())
                            .expect("forward validated this row");
                        for j in 0..c {
                            let ind = if j == y2 { S::one() } else { S::zero() };
                            dx[i2 * c + j] = g * (p[j] - ind);
                        }
                    }
                    add_grad(head, *logits, &dx);
                }
                Op::BatchNorm { x, gamma, beta, xhat, inv_std, training } => {
                    let (b, d) = head[x.0].value.dims2()?;
                    let gs = head[gamma.0].value.data();
                    let bn = S::of(b as f64);
                    let mut dgamma = vec![S::zero(); d];
                    let mut dbeta = vec![S::zero(); d];
                    let mut dx = vec![S::zero(); b * d];
                    for j in 0..d {
                        let mut sum_dy = S::zero();
                        let mut sum_dy_xhat = S::zero();
                        for i2 in 0..b {
                            let t = i2 * d + j;
                            sum_dy = sum_dy + dy[t];
                            sum_dy_xhat = sum_dy_xhat + dy[t] * xhat[t];
                        }
                        dgamma[j] = sum_dy_xhat;
                        dbeta[j] = sum_dy;
                        if *training {
                            // Batch statistics depend on x, so the gradient
                            // carries the mean and variance terms.
                            for i2 in 0..b {
                                let t = i2 * d + j;
                                let dxhat = dy[t] * gs[j];
                                dx[t] = inv_std[j] / bn
                                    * (bn * dxhat
                                        - gs[j] * sum_dy
                                        - xhat[t] * gs[j] * sum_dy_xhat);
                            }
                        } else {
                            for i2 in 0..b {
                                let t = i2 * d + j;
                                dx[t] = dy[t] * gs[j] * inv_std[j];
                            }
                        }
                    }
                    add_grad(head, *x, &dx);
                    add_grad(head, *gamma, &dgamma);
                    add_grad(head, *beta, &dbeta);
                }
                Op::ConcatScalars { parts } => {
                    for (t, &p) in parts.iter().enumerate() {
                        add_grad(head, p, &[dy[t]]);
                    }
                }
            }
        }
        Ok(())
    }
}

fn add_grad<S: Scalar>(nodes: &mut [Node<S>], v: Var, contrib: &[S]) {
    let node = &mut nodes[v.0];
    let g = node.grad.get_or_insert_with(|| vec![S::zero(); node.value.numel()]);
    for (gi, &ci) in g.iter_mut().zip(contrib) {
        *gi = *gi + ci;
    }
}

// ── value kernels, shared with the no-tape forward paths ───────────────

pub(crate) fn matmul_values<S: Scalar>(a: &[S], (m, k): (usize, usize), b: &[S], n: usize) -> Vec<S> {
    let mut out = vec![S::zero(); m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == S::zero() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] = out[i * n + j] + aip * b[p * n + j];
            }
        }
    }
    out
}

pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

pub(crate) fn cosine_values<S: Scalar>(a: &[S], b: &[S]) -> Result<S> {
    let na = norm(a);
    let nb = norm(b);
    if na == S::zero() || nb == S::zero() {
        return Err(Error::degenerate("cosine of a zero-norm vector"));
    }
    Ok(dot(a, b) / (na * nb))
}

/// Max-subtracted block softmax; safe for any positive temperature.
pub(crate) fn softmax_blocks_values<S: Scalar>(x: &[S], block: usize, tau: S) -> Result<Vec<S>> {
    if block == 0 {
        return Err(Error::param("softmax block must be positive"));
    }
    if !(tau.is_finite() && tau > S::zero()) {
        return Err(Error::param(format!("temperature must be positive and finite, got {tau}")));
    }
    if x.is_empty() || x.len() % block != 0 {
        return Err(Error::shape(
            "softmax_blocks",
            format!("{} values do not split into blocks of {block}", x.len()),
        ));
    }
    let mut out = vec![S::zero(); x.len()];
    for blk in 0..x.len() / block {
        let lo = blk * block;
        let hi = lo + block;
        let mut m = x[lo];
        for &xv in &x[lo + 1..hi] {
            m = m.max(xv);
        }
        let mut sum = S::zero();
        for (o, &xv) in out[lo..hi].iter_mut().zip(&x[lo..hi]) {
            let e = ((xv - m) / tau).exp();
            *o = e;
            sum = sum + e;
        }
        for o in &mut out[lo..hi] {
            *o = *o / sum;
        }
    }
    Ok(out)
}

pub(crate) fn log_sum_exp_values<S: Scalar>(x: &[S]) -> S {
    let mut m = x[0];
    for &v in &x[1..] {
        m = m.max(v);
    }
    let mut sum = S::zero();
    for &v in x {
        sum = sum + ((v - m) / S::one()).exp();
    }
    m + sum.ln()
}

pub(crate) fn relu_values<S: Scalar>(x: &[S]) -> Vec<S> {
    x.iter().map(|&v| v.max(S::zero())).collect()
}

pub(crate) fn add_bias_values<S: Scalar>(x: &[S], (r, c): (usize, usize), bias: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(x[i * c + j] + bias[j]);
        }
    }
    out
}

fn check_finite<S: Scalar>(op: &str, values: &[S]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract(format!("{op} produced a non-finite value")));
    }
    Ok(())
}
