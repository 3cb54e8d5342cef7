use super::la::{mm_nn, mm_nt, mm_tn, sigmoid};
use super::lstm::{lstm_backward, lstm_forward, lstm_macs, LstmCache, LstmDims};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiffArray(usize);

impl DiffArray {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Normalize with batch statistics.
    Train,
    /// Normalize with the supplied running statistics.
    Eval,
}

/// Per-feature statistics of one training-mode batch-norm call.
#[derive(Debug, Clone, PartialEq)]
pub struct BnBatchStats<T> {
    pub mean: Vec<T>,
    /// Unbiased (`n - 1`) variance, for running-statistics updates.
    pub var_unbiased: Vec<T>,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Affine { x: DiffArray, w: DiffArray, b: Option<DiffArray> },
    Add(DiffArray, DiffArray),
    Sub(DiffArray, DiffArray),
    Mul(DiffArray, DiffArray),
    Scale(DiffArray, T),
    Sigmoid(DiffArray),
    Tanh(DiffArray),
    Concat(Vec<DiffArray>),
    Slice { x: DiffArray, start: usize },
    Gather { x: DiffArray, index: Vec<usize> },
    BatchNorm { x: DiffArray, gamma: DiffArray, beta: DiffArray, xhat: Vec<T>, inv_std: Vec<T>, train: bool },
    Lstm { x: DiffArray, w_ih: DiffArray, w_hh: DiffArray, b_ih: DiffArray, b_hh: DiffArray, reverse: bool, cache: LstmCache<T> },
    BceLogits { logits: DiffArray, targets: Vec<T>, k: usize },
    WeightedSum { x: DiffArray, w: Vec<T> },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Records operations for reverse-mode differentiation.
///
/// Node ids are assigned in creation order, which is a topological order,
/// so the backward sweep simply walks the ids downwards.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    macs: u64,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: DiffArray) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
    pub fn take(&mut self, v: DiffArray) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn shape_err(what: &str, a: &[usize], b: &[usize]) -> Error {
    Error::Shape(format!("{what}: {a:?} vs {b:?}"))
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), macs: 0 }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Multiply-accumulates performed by the forward computations so far.
    pub fn macs(&self) -> u64 {
        self.macs
    }

    pub fn value(&self, v: DiffArray) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: DiffArray) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> DiffArray {
        self.nodes.push(Node { value, op, needs_grad });
        DiffArray(self.nodes.len() - 1)
    }

    fn ng(&self, v: DiffArray) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> DiffArray {
        self.push(value, Op::Leaf, true)
    }

    /// A detached leaf; it never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> DiffArray {
        self.push(value, Op::Leaf, false)
    }

    /// `y = x W^T + b` over the last axis; `W: [D_out, D_in]`, `b: [D_out]`.
    pub fn affine(&mut self, x: DiffArray, w: DiffArray, b: Option<DiffArray>) -> Result<DiffArray> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if ws.len() != 2 || xs.last().copied() != Some(ws[1]) {
            return Err(shape_err("affine input vs weight", &xs, &ws));
        }
        let (dout, din) = (ws[0], ws[1]);
        if let Some(b) = b {
            if self.shape(b) != [dout] {
                return Err(shape_err("affine bias", self.shape(b), &[dout]));
            }
        }
        let rows = self.value(x).rows();
        let mut y = vec![T::zero(); rows * dout];
        mm_nt(rows, din, dout, self.value(x).data(), self.value(w).data(), &mut y, false);
        if let Some(b) = b {
            let bv = self.value(b).data();
            for row in y.chunks_exact_mut(dout) {
                for (v, &c) in row.iter_mut().zip(bv) {
                    *v += c;
                }
            }
        }
        self.macs += (rows * din * dout) as u64;
        let mut shape = xs;
        *shape.last_mut().expect("non-scalar") = dout;
        let ng = self.ng(x) || self.ng(w) || b.is_some_and(|b| self.ng(b));
        Ok(self.push(Tensor::new(&shape, y)?, Op::Affine { x, w, b }, ng))
    }

    fn binary(&mut self, a: DiffArray, b: DiffArray, what: &str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err(what, va.shape(), vb.shape()));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(va.shape(), data)
    }

    pub fn add(&mut self, a: DiffArray, b: DiffArray) -> Result<DiffArray> {
        let v = self.binary(a, b, "add", |x, y| x + y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: DiffArray, b: DiffArray) -> Result<DiffArray> {
        let v = self.binary(a, b, "sub", |x, y| x - y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::Sub(a, b), ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: DiffArray, b: DiffArray) -> Result<DiffArray> {
        let v = self.binary(a, b, "mul", |x, y| x * y)?;
        self.macs += v.len() as u64;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: DiffArray, c: T) -> DiffArray {
        let v = self.value(a).map(|x| x * c);
        let ng = self.ng(a);
        self.push(v, Op::Scale(a, c), ng)
    }

    pub fn sigmoid(&mut self, a: DiffArray) -> DiffArray {
        let v = self.value(a).map(sigmoid);
        let ng = self.ng(a);
        self.push(v, Op::Sigmoid(a), ng)
    }

    pub fn tanh(&mut self, a: DiffArray) -> DiffArray {
        let v = self.value(a).map(|x| x.tanh());
        let ng = self.ng(a);
        self.push(v, Op::Tanh(a), ng)
    }

    /// Concatenates along the last axis; leading axes must agree.
    pub fn concat(&mut self, parts: &[DiffArray]) -> Result<DiffArray> {
        let Some(&first) = parts.first() else {
            return Err(Error::Shape("concat of nothing".into()));
        };
        let lead = self.shape(first)[..self.shape(first).len() - 1].to_vec();
        let rows = self.value(first).rows();
        let mut width = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != lead.len() + 1 || s[..lead.len()] != lead[..] {
                return Err(shape_err("concat", s, self.shape(first)));
            }
            width += s[lead.len()];
        }
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for &p in parts {
                let v = self.value(p);
                let d = v.last_dim();
                data.extend_from_slice(&v.data()[r * d..(r + 1) * d]);
            }
        }
        let mut shape = lead;
        shape.push(width);
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Tensor::new(&shape, data)?, Op::Concat(parts.to_vec()), ng))
    }

    /// Columns `start..start + len` of the last axis.
    pub fn slice_last(&mut self, x: DiffArray, start: usize, len: usize) -> Result<DiffArray> {
        let v = self.value(x);
        let d = v.last_dim();
        if start + len > d {
            return Err(Error::Shape(format!("slice {start}..{} of width {d}", start + len)));
        }
        let data = v.data().chunks_exact(d).flat_map(|r| r[start..start + len].iter().copied()).collect();
        let mut shape = v.shape().to_vec();
        *shape.last_mut().expect("non-scalar") = len;
        let ng = self.ng(x);
        Ok(self.push(Tensor::new(&shape, data)?, Op::Slice { x, start }, ng))
    }

    /// Permutes sequence positions of `x: [B, S, D]`: `out[b, i] = x[b, index[i]]`.
    pub fn gather_seq(&mut self, x: DiffArray, index: &[usize]) -> Result<DiffArray> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || index.len() != s[1] || index.iter().any(|&i| i >= s[1]) {
            return Err(Error::Shape(format!("gather of {} positions from {s:?}", index.len())));
        }
        let (b, n, d) = (s[0], s[1], s[2]);
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(b * n * d);
        for bi in 0..b {
            for &i in index {
                data.extend_from_slice(&src[(bi * n + i) * d..(bi * n + i + 1) * d]);
            }
        }
        let ng = self.ng(x);
        Ok(self.push(
            Tensor::new(&s, data)?,
            Op::Gather {
                x,
                index: index.to_vec(),
            },
            ng,
        ))
    }

    /// Batch normalization over the last (feature) axis, statistics pooled
    /// over all leading axes. In `Eval` mode `running` supplies the
    /// (mean, variance) pair; in `Train` mode the batch statistics are
    /// returned for the caller to fold into its running averages.
    pub fn batchnorm(
        &mut self,
        x: DiffArray,
        gamma: DiffArray,
        beta: DiffArray,
        mode: BnMode,
        running: (&[T], &[T]),
        eps: T,
    ) -> Result<(DiffArray, Option<BnBatchStats<T>>)> {
        let v = self.value(x);
        let d = v.last_dim();
        let n = v.rows();
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(shape_err("batchnorm affine", self.shape(gamma), &[d]));
        }
        let (mean, var, stats) = match mode {
            BnMode::Train => {
                if n < 2 {
                    return Err(Error::DegenerateBatch(format!(
                        "batch norm needs at least 2 samples per feature, got {n}"
                    )));
                }
                let nf = T::lit(n as f64);
                let mut mean = vec![T::zero(); d];
                for r in v.data().chunks_exact(d) {
                    for (m, &x) in mean.iter_mut().zip(r) {
                        *m += x;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= nf);
                let mut var = vec![T::zero(); d];
                for r in v.data().chunks_exact(d) {
                    for ((s, &x), &m) in var.iter_mut().zip(r).zip(&mean) {
                        *s += (x - m) * (x - m);
                    }
                }
                let unbiased = var.iter().map(|&s| s / T::lit((n - 1) as f64)).collect();
                var.iter_mut().for_each(|s| *s /= nf);
                let stats = BnBatchStats {
                    mean: mean.clone(),
                    var_unbiased: unbiased,
                };
                (mean, var, Some(stats))
            }
            BnMode::Eval => {
                if running.0.len() != d || running.1.len() != d {
                    return Err(shape_err("batchnorm running stats", &[running.0.len()], &[d]));
                }
                (running.0.to_vec(), running.1.to_vec(), None)
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&s| (s + eps).sqrt().recip()).collect();
        let (g, bt) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n * d);
        for r in v.data().chunks_exact(d) {
            for j in 0..d {
                let h = (r[j] - mean[j]) * inv_std[j];
                xhat.push(h);
                y.push(h * g[j] + bt[j]);
            }
        }
        let shape = v.shape().to_vec();
        self.macs += (4 * n * d) as u64;
        let ng = self.ng(x) || self.ng(gamma) || self.ng(beta);
        let out = self.push(
            Tensor::new(&shape, y)?,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train: mode == BnMode::Train,
            },
            ng,
        );
        Ok((out, stats))
    }

    /// One LSTM direction over `x: [B, S, D_in]` with zero initial state;
    /// `reverse` runs from the last position to the first. Output `[B, S, H]`.
    pub fn lstm(
        &mut self,
        x: DiffArray,
        w_ih: DiffArray,
        w_hh: DiffArray,
        b_ih: DiffArray,
        b_hh: DiffArray,
        reverse: bool,
    ) -> Result<DiffArray> {
        let xs = self.shape(x).to_vec();
        let wh = self.shape(w_hh).to_vec();
        if xs.len() != 3 || wh.len() != 2 || wh[0] != 4 * wh[1] {
            return Err(shape_err("lstm input / recurrent weight", &xs, &wh));
        }
        let h = wh[1];
        let dims = LstmDims {
            batch: xs[0],
            steps: xs[1],
            d_in: xs[2],
            hidden: h,
            reverse,
        };
        if self.shape(w_ih) != [4 * h, xs[2]] {
            return Err(shape_err("lstm input weight", self.shape(w_ih), &[4 * h, xs[2]]));
        }
        if self.shape(b_ih) != [4 * h] || self.shape(b_hh) != [4 * h] {
            return Err(shape_err("lstm bias", self.shape(b_ih), &[4 * h]));
        }
        let (out, cache) = lstm_forward(
            &dims,
            self.value(x).data(),
            self.value(w_ih).data(),
            self.value(w_hh).data(),
            self.value(b_ih).data(),
            self.value(b_hh).data(),
        );
        self.macs += lstm_macs(&dims);
        let ng = [x, w_ih, w_hh, b_ih, b_hh].iter().any(|&v| self.ng(v));
        Ok(self.push(
            Tensor::new(&[xs[0], xs[1], h], out)?,
            Op::Lstm {
                x,
                w_ih,
                w_hh,
                b_ih,
                b_hh,
                reverse,
                cache,
            },
            ng,
        ))
    }

    /// Mean binary cross-entropy between `sigmoid(logits)` and `targets`,
    /// evaluated in logit form. `logits: [B, S, 1]` (or `[B, S]`); only the
    /// first `k` positions of each sequence are scored, `targets` is `[B, k]`.
    pub fn bce_with_logits(&mut self, logits: DiffArray, targets: &[u8], k: usize) -> Result<DiffArray> {
        let s = self.shape(logits).to_vec();
        if s.len() < 2 || s[2..].iter().product::<usize>() != 1 || k > s[1] || targets.len() != s[0] * k {
            return Err(Error::Shape(format!(
                "bce: logits {s:?} vs {} targets for k={k}",
                targets.len()
            )));
        }
        let (b, n) = (s[0], s[1]);
        let z = self.value(logits).data();
        let mut total = T::zero();
        for bi in 0..b {
            for t in 0..k {
                let x = z[bi * n + t];
                let y = T::lit(targets[bi * k + t] as f64);
                total += x.max(T::zero()) - x * y + (-x.abs()).exp().ln_1p();
            }
        }
        let loss = total / T::lit((b * k) as f64);
        let ng = self.ng(logits);
        let targets = targets.iter().map(|&t| T::lit(t as f64)).collect();
        Ok(self.push(Tensor::scalar(loss), Op::BceLogits { logits, targets, k }, ng))
    }

    /// `sum(x * w)` for a fixed weight vector.
    pub fn weighted_sum(&mut self, x: DiffArray, w: &[T]) -> Result<DiffArray> {
        let v = self.value(x);
        if v.len() != w.len() {
            return Err(Error::Shape(format!("weighted sum of {} values with {} weights", v.len(), w.len())));
        }
        let s = v.data().iter().zip(w).map(|(&a, &b)| a * b).sum();
        let ng = self.ng(x);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum { x, w: w.to_vec() }, ng))
    }

    pub fn sum(&mut self, x: DiffArray) -> Result<DiffArray> {
        let n = self.value(x).len();
        self.weighted_sum(x, &vec![T::one(); n])
    }

    /// Reverse sweep from a scalar `root`. Gradients accumulate, so a value
    /// used several times receives the sum of its contributions.
    pub fn backward(&self, root: DiffArray) -> Result<Gradients<T>> {
        if self.value(root).len() != 1 {
            return Err(Error::Shape(format!("backward from non-scalar {:?}", self.shape(root))));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(self.shape(root), T::one()));
        for id in (0..=root.0).rev() {
            let node = &self.nodes[id];
            if matches!(node.op, Op::Leaf) || !node.needs_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.backprop(node, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn acc(&self, grads: &mut [Option<Tensor<T>>], v: DiffArray, g: Tensor<T>) {
        if !self.ng(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(t) => t.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn acc_with(&self, grads: &mut [Option<Tensor<T>>], v: DiffArray, f: impl FnOnce() -> Vec<T>) {
        if self.ng(v) {
            let t = Tensor::new(self.shape(v), f()).expect("gradient shape");
            self.acc(grads, v, t);
        }
    }

    fn backprop(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        let one = T::one();
        match &node.op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                let ws = self.shape(*w);
                let (dout, din) = (ws[0], ws[1]);
                let rows = self.value(*x).rows();
                self.acc_with(grads, *x, || {
                    let mut dx = vec![T::zero(); rows * din];
                    mm_nn(rows, dout, din, gd, self.value(*w).data(), &mut dx, false);
                    dx
                });
                self.acc_with(grads, *w, || {
                    let mut dw = vec![T::zero(); dout * din];
                    mm_tn(dout, rows, din, gd, self.value(*x).data(), &mut dw, false);
                    dw
                });
                if let Some(b) = b {
                    self.acc_with(grads, *b, || col_sums(gd, dout));
                }
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc(grads, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                self.acc_with(grads, *a, || zip_mul(gd, self.value(*b).data()));
                self.acc_with(grads, *b, || zip_mul(gd, self.value(*a).data()));
            }
            Op::Scale(a, c) => self.acc(grads, *a, g.map(|v| v * *c)),
            Op::Sigmoid(a) => {
                let y = node.value.data();
                self.acc_with(grads, *a, || gd.iter().zip(y).map(|(&g, &s)| g * s * (one - s)).collect());
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                self.acc_with(grads, *a, || gd.iter().zip(y).map(|(&g, &t)| g * (one - t * t)).collect());
            }
            Op::Concat(parts) => {
                let width = node.value.last_dim();
                let mut off = 0;
                for &p in parts {
                    let d = self.value(p).last_dim();
                    self.acc_with(grads, p, || {
                        gd.chunks_exact(width).flat_map(|r| r[off..off + d].iter().copied()).collect()
                    });
                    off += d;
                }
            }
            Op::Slice { x, start } => {
                let len = node.value.last_dim();
                let d = self.value(*x).last_dim();
                self.acc_with(grads, *x, || {
                    let mut out = vec![T::zero(); self.value(*x).len()];
                    for (r, gr) in out.chunks_exact_mut(d).zip(gd.chunks_exact(len)) {
                        r[*start..start + len].copy_from_slice(gr);
                    }
                    out
                });
            }
            Op::Gather { x, index } => {
                let s = self.shape(*x);
                let (b, n, d) = (s[0], s[1], s[2]);
                self.acc_with(grads, *x, || {
                    let mut out = vec![T::zero(); b * n * d];
                    for bi in 0..b {
                        for (i, &src) in index.iter().enumerate() {
                            let dst = &mut out[(bi * n + src) * d..(bi * n + src + 1) * d];
                            for (o, &v) in dst.iter_mut().zip(&gd[(bi * n + i) * d..(bi * n + i + 1) * d]) {
                                *o += v;
                            }
                        }
                    }
                    out
                });
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            } => {
                let d = inv_std.len();
                let n = xhat.len() / d;
                let gam = self.value(*gamma).data();
                let mut sum_g = vec![T::zero(); d];
                let mut sum_gx = vec![T::zero(); d];
                for (gr, hr) in gd.chunks_exact(d).zip(xhat.chunks_exact(d)) {
                    for j in 0..d {
                        sum_g[j] += gr[j];
                        sum_gx[j] += gr[j] * hr[j];
                    }
                }
                self.acc_with(grads, *x, || {
                    let nf = T::lit(n as f64);
                    let mut dx = Vec::with_capacity(n * d);
                    for (gr, hr) in gd.chunks_exact(d).zip(xhat.chunks_exact(d)) {
                        for j in 0..d {
                            let v = if *train {
                                gam[j] * inv_std[j] * (gr[j] - sum_g[j] / nf - hr[j] * sum_gx[j] / nf)
                            } else {
                                gam[j] * inv_std[j] * gr[j]
                            };
                            dx.push(v);
                        }
                    }
                    dx
                });
                self.acc_with(grads, *gamma, || sum_gx.clone());
                self.acc_with(grads, *beta, || sum_g.clone());
            }
            Op::Lstm {
                x,
                w_ih,
                w_hh,
                b_ih,
                b_hh,
                reverse,
                cache,
            } => {
                let xs = self.shape(*x);
                let dims = LstmDims {
                    batch: xs[0],
                    steps: xs[1],
                    d_in: xs[2],
                    hidden: node.value.last_dim(),
                    reverse: *reverse,
                };
                let lg = lstm_backward(
                    &dims,
                    cache,
                    self.value(*x).data(),
                    self.value(*w_ih).data(),
                    self.value(*w_hh).data(),
                    gd,
                );
                self.acc_with(grads, *x, || lg.dx);
                self.acc_with(grads, *w_ih, || lg.dw_ih);
                self.acc_with(grads, *w_hh, || lg.dw_hh);
                self.acc_with(grads, *b_ih, || lg.db.clone());
                self.acc_with(grads, *b_hh, || lg.db);
            }
            Op::BceLogits { logits, targets, k } => {
                let s = self.shape(*logits);
                let (b, n) = (s[0], s[1]);
                let scale = gd[0] / T::lit((b * k) as f64);
                let z = self.value(*logits).data();
                self.acc_with(grads, *logits, || {
                    let mut out = vec![T::zero(); z.len()];
                    for bi in 0..b {
                        for t in 0..*k {
                            out[bi * n + t] = (sigmoid(z[bi * n + t]) - targets[bi * k + t]) * scale;
                        }
                    }
                    out
                });
            }
            Op::WeightedSum { x, w } => {
                self.acc_with(grads, *x, || w.iter().map(|&v| v * gd[0]).collect());
            }
        }
    }
}

fn col_sums<T: Real>(g: &[T], width: usize) -> Vec<T> {
    let mut out = vec![T::zero(); width];
    for r in g.chunks_exact(width) {
        for (o, &v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    out
}

fn zip_mul<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x * y).collect()
}
