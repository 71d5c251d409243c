//! Reverse-mode differentiation tape.
//!
//! Every operation appends a node holding its forward value and whatever it
//! needs for the backward rule. Nodes are appended in creation order, so the
//! tape is topologically sorted by construction and the backward sweep is a
//! single reverse pass.
//!
//! Parameters are not copied onto the tape; a parameter node borrows its
//! value from the [`ParamStore`] the tape was created over. The backward
//! pass returns a [`Gradients`] value that the caller folds into the store
//! once the tape is dropped.

use rand::Rng;

use super::conv::{self, ConvGeom, Padding};
use super::linalg::gemm;
use super::norm::{self, ChannelStats};
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Reference to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Toggles batch normalization statistics and dropout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

enum Op {
    Leaf,
    Param(ParamId),
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        /// Patch matrix, kept only by the GEMM path.
        cols: Option<Vec<f64>>,
        geom: ConvGeom,
    },
    MaxPool2 {
        x: Var,
        argmax: Vec<usize>,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    Dense {
        x: Var,
        w: Var,
        b: Var,
    },
    Relu {
        x: Var,
    },
    Sigmoid {
        x: Var,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    Mse {
        pred: Var,
        target: Var,
    },
    Sum {
        x: Var,
    },
    Scale {
        x: Var,
        factor: f64,
    },
    Add {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Reshape {
        x: Var,
    },
    Concat {
        parts: Vec<Var>,
    },
}

struct Node {
    /// `None` for parameter nodes, whose value lives in the store.
    value: Option<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation for one backward sweep.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

/// Result of a backward sweep: gradients for parameters and grad-requiring leaves.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    leaves: Vec<(Var, Vec<f64>)>,
    params: Vec<(ParamId, Vec<f64>)>,
}

impl Gradients {
    /// Gradient of a leaf created with [`Tape::leaf`] or [`Tape::param`].
    pub fn of(&self, var: Var) -> Option<&[f64]> {
        self.leaves.iter().find(|(v, _)| *v == var).map(|(_, g)| g.as_slice())
    }

    pub fn param(&self, id: ParamId) -> Option<&[f64]> {
        self.params.iter().find(|(p, _)| *p == id).map(|(_, g)| g.as_slice())
    }

    /// Adds the parameter gradients into the store. Parameters the loss did not
    /// reach receive an explicit zero gradient.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for id in store.ids().collect::<Vec<_>>() {
            let tensor = store.tensor_mut(id);
            match self.param(id) {
                Some(g) => tensor.accumulate_grad(g),
                None => tensor.accumulate_grad(&vec![0.0; tensor.numel()]),
            }
        }
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        let node = &self.nodes[var.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.tensor(*id),
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    fn shape(&self, var: Var) -> &[usize] {
        self.value(var).shape()
    }

    fn needs(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a constant input; no gradient is computed for it.
    pub fn input(&mut self, tensor: Tensor) -> Var {
        let tensor = tensor.with_requires_grad(false);
        self.push(tensor, Op::Leaf, false)
    }

    /// Records a leaf, differentiable when `tensor.requires_grad()` is set.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        let rg = tensor.requires_grad();
        self.push(tensor, Op::Leaf, rg)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// 2-D convolution over `[n, c, h, w]` with weights `[f, c, kh, kw]` and bias `[f]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, padding: Padding) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 4 || ws.len() != 4 || bs.len() != 1 {
            return Err(Error::shape(
                "conv2d",
                format!("expected input [n,c,h,w], weights [f,c,kh,kw], bias [f]; got {xs:?}, {ws:?}, {bs:?}"),
            ));
        }
        let (n, c, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (f, wc, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
        if wc != c {
            return Err(Error::shape("conv2d", format!("weights expect {wc} input channels, input has {c}")));
        }
        if bs[0] != f {
            return Err(Error::shape("conv2d", format!("bias has {} entries for {f} filters", bs[0])));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::shape("conv2d", format!("kernel {kh}x{kw} must have odd spatial dims")));
        }
        let (pad_h, pad_w, oh, ow) = match padding {
            Padding::Same => (kh / 2, kw / 2, h, wd),
            Padding::Valid => {
                if kh > h || kw > wd {
                    return Err(Error::shape("conv2d", format!("kernel {kh}x{kw} larger than input {h}x{wd}")));
                }
                (0, 0, h - kh + 1, wd - kw + 1)
            }
        };
        let geom = ConvGeom {
            n,
            c,
            h,
            w: wd,
            f,
            kh,
            kw,
            pad_h,
            pad_w,
            oh,
            ow,
        };
        let (out, cols) = conv::conv2d_forward(
            &geom,
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
        );
        let rg = self.needs(x) || self.needs(w) || self.needs(b);
        let value = Tensor::new(vec![n, f, oh, ow], out)?;
        Ok(self.push(value, Op::Conv2d { x, w, b, cols, geom }, rg))
    }

    /// 2×2 max pooling with stride 2.
    pub fn maxpool2d(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 4 {
            return Err(Error::shape("maxpool2d", format!("expected [n,c,h,w], got {s:?}")));
        }
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::shape(
                "maxpool2d",
                format!("spatial dims {h}x{w} are not even; resize the input so each pooled dim is divisible by 2"),
            ));
        }
        let (out, argmax) = conv::maxpool2_forward(n, c, h, w, self.value(x).data());
        let rg = self.needs(x);
        let value = Tensor::new(vec![n, c, h / 2, w / 2], out)?;
        Ok(self.push(value, Op::MaxPool2 { x, argmax }, rg))
    }

    fn check_norm(&self, x: Var, gamma: Var, beta: Var) -> Result<(usize, usize, usize)> {
        let s = self.shape(x);
        if s.len() != 4 {
            return Err(Error::shape("batchnorm2d", format!("expected [n,c,h,w], got {s:?}")));
        }
        let c = s[1];
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return Err(Error::shape(
                "batchnorm2d",
                format!(
                    "gamma {:?} / beta {:?} must both be [{c}]",
                    self.shape(gamma),
                    self.shape(beta)
                ),
            ));
        }
        Ok((s[0], c, s[2] * s[3]))
    }

    /// Batch normalization using the statistics of this batch. Returns the
    /// batch statistics so the caller can update running averages.
    pub fn batchnorm2d_train(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<(Var, ChannelStats)> {
        let (n, c, spatial) = self.check_norm(x, gamma, beta)?;
        if n * spatial < 2 {
            return Err(Error::shape(
                "batchnorm2d",
                format!("training mode needs at least 2 values per channel, got {}", n * spatial),
            ));
        }
        let xv = self.value(x).data();
        let stats = norm::batch_stats(n, c, spatial, xv);
        let fwd = norm::normalize(n, c, spatial, xv, &stats, self.value(gamma).data(), self.value(beta).data(), eps);
        let rg = self.needs(x) || self.needs(gamma) || self.needs(beta);
        let value = Tensor::new(self.shape(x).to_vec(), fwd.out)?;
        let var = self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat: fwd.xhat,
                inv_std: fwd.inv_std,
                batch_stats: true,
            },
            rg,
        );
        Ok((var, stats))
    }

    /// Batch normalization with fixed (running) statistics.
    pub fn batchnorm2d_infer(&mut self, x: Var, gamma: Var, beta: Var, stats: &ChannelStats, eps: f64) -> Result<Var> {
        let (n, c, spatial) = self.check_norm(x, gamma, beta)?;
        if stats.mean.len() != c || stats.var.len() != c {
            return Err(Error::shape("batchnorm2d", format!("running stats do not cover {c} channels")));
        }
        let fwd = norm::normalize(
            n,
            c,
            spatial,
            self.value(x).data(),
            stats,
            self.value(gamma).data(),
            self.value(beta).data(),
            eps,
        );
        let rg = self.needs(x) || self.needs(gamma) || self.needs(beta);
        let value = Tensor::new(self.shape(x).to_vec(), fwd.out)?;
        Ok(self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat: fwd.xhat,
                inv_std: fwd.inv_std,
                batch_stats: false,
            },
            rg,
        ))
    }

    /// Affine map `x·w + b` for `x: [n, d]`, `w: [d, u]`, `b: [u]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 || xs[1] != ws[0] || bs[0] != ws[1] {
            return Err(Error::shape(
                "dense",
                format!("input {xs:?}, weights {ws:?}, bias {bs:?} do not compose as [n,d]x[d,u]+[u]"),
            ));
        }
        let (n, d, u) = (xs[0], xs[1], ws[1]);
        let bias = self.value(b).data();
        let mut out: Vec<f64> = (0..n).flat_map(|_| bias.iter().copied()).collect();
        gemm(n, d, u, self.value(x).data(), false, self.value(w).data(), false, 1.0, &mut out);
        let rg = self.needs(x) || self.needs(w) || self.needs(b);
        let value = Tensor::new(vec![n, u], out)?;
        Ok(self.push(value, Op::Dense { x, w, b }, rg))
    }

    fn map(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::new(t.shape().to_vec(), data)?;
        let rg = self.needs(x);
        Ok(self.push(value, op, rg))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.map(x, |v| v.max(0.0), Op::Relu { x })
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.map(x, sigmoid, Op::Sigmoid { x })
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        self.map(x, |v| v * factor, Op::Scale { x, factor })
    }

    /// Inverted dropout: survivors are scaled by `1 / (1 - rate)`. Identity in
    /// inference mode or at rate 0.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, mode: Mode, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate {rate} must lie in [0, 1)")));
        }
        if mode == Mode::Infer || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let t = self.value(x);
        let mask: Vec<f64> = (0..t.numel())
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let data = t.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(t.shape().to_vec(), data)?;
        let rg = self.needs(x);
        Ok(self.push(value, Op::Dropout { x, mask }, rg))
    }

    /// Mean categorical cross-entropy of `softmax(logits)` against integer labels.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let s = self.shape(logits);
        if s.len() != 2 || s[0] != labels.len() {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("logits {s:?} do not match {} labels", labels.len()),
            ));
        }
        let (n, k) = (s[0], s[1]);
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range for {k} classes")));
        }
        let z = self.value(logits).data();
        let mut probs = vec![0.0; n * k];
        let mut loss = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            let row = &z[i * k..(i + 1) * k];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_sum = sum.ln() + max;
            loss += log_sum - row[label];
            for j in 0..k {
                probs[i * k + j] = (row[j] - log_sum).exp();
            }
        }
        let rg = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(loss / n as f64),
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Mean squared error over all elements.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.shape(pred) != self.shape(target) {
            return Err(Error::shape(
                "mse",
                format!("prediction {:?} vs target {:?}", self.shape(pred), self.shape(target)),
            ));
        }
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let loss = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64;
        let rg = self.needs(pred) || self.needs(target);
        Ok(self.push(Tensor::scalar(loss), Op::Mse { pred, target }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total = self.value(x).data().iter().sum();
        let rg = self.needs(x);
        Ok(self.push(Tensor::scalar(total), Op::Sum { x }, rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    /// Elementwise sum of two equally-shaped tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add { a, b }, rg))
    }

    /// Elementwise product of two equally-shaped tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul { a, b }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshaped(shape).map_err(|_| {
            Error::shape("reshape", format!("cannot view {:?} as {shape:?}", self.shape(x)))
        })?;
        let rg = self.needs(x);
        Ok(self.push(value, Op::Reshape { x }, rg))
    }

    /// Collapses all but the leading axis.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        let n = s[0];
        let rest = s[1..].iter().product();
        self.reshape(x, &[n, rest])
    }

    /// Concatenates along the leading (batch) axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::shape("concat", "nothing to concatenate"))?;
        let tail = self.shape(first)[1..].to_vec();
        let mut lead = 0;
        let mut data = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s[1..] != tail[..] {
                return Err(Error::shape("concat", format!("{s:?} does not match trailing dims {tail:?}")));
            }
            lead += s[0];
            data.extend_from_slice(self.value(p).data());
        }
        let mut shape = vec![lead];
        shape.extend_from_slice(&tail);
        let rg = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Tensor::new(shape, data)?, Op::Concat { parts: parts.to_vec() }, rg))
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(Error::shape("backward", format!("loss must be a scalar, got shape {:?}", lv.shape())));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.apply_rule(idx, &node.op, g, &mut grads, &mut out);
        }
        Ok(out)
    }

    fn apply_rule(
        &self,
        idx: usize,
        op: &Op,
        g: Vec<f64>,
        grads: &mut [Option<Vec<f64>>],
        out: &mut Gradients,
    ) {
        let mut put = |v: Var, c: Contribution<'_>| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match (&mut grads[v.0], c) {
                (slot @ None, Contribution::Owned(vec)) => *slot = Some(vec),
                (Some(existing), Contribution::Owned(vec)) => add_into(&vec)(existing),
                (slot, Contribution::Scatter(f)) => {
                    let len = self.value(v).numel();
                    f(slot.get_or_insert_with(|| vec![0.0; len]));
                }
            }
        };
        use Contribution::{Owned, Scatter};

        match op {
            Op::Leaf => out.leaves.push((Var(idx), g)),
            Op::Param(id) => match out.params.iter_mut().find(|(p, _)| p == id) {
                Some((_, existing)) => existing.iter_mut().zip(&g).for_each(|(e, gi)| *e += gi),
                None => out.params.push((*id, g)),
            },
            Op::Conv2d { x, w, b, cols, geom } => {
                let need = [self.needs(*x), self.needs(*w), self.needs(*b)];
                let cg = match cols {
                    Some(cols) => conv::gemm_backward(geom, &g, cols, self.value(*w).data(), need),
                    None => conv::direct_backward(geom, &g, self.value(*x).data(), self.value(*w).data(), need),
                };
                if let Some(dx) = cg.input {
                    put(*x, Owned(dx));
                }
                if let Some(dw) = cg.weight {
                    put(*w, Owned(dw));
                }
                if let Some(db) = cg.bias {
                    put(*b, Owned(db));
                }
            }
            Op::MaxPool2 { x, argmax } => put(
                *x,
                Scatter(&|dst| {
                    for (gi, &src) in g.iter().zip(argmax) {
                        dst[src] += gi;
                    }
                }),
            ),
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let s = self.shape(*x);
                let ng = norm::normalize_backward(
                    s[0],
                    s[1],
                    s[2] * s[3],
                    &g,
                    xhat,
                    inv_std,
                    self.value(*gamma).data(),
                    *batch_stats,
                );
                put(*x, Owned(ng.input));
                put(*gamma, Owned(ng.gamma));
                put(*beta, Owned(ng.beta));
            }
            Op::Dense { x, w, b } => {
                let (xs, ws) = (self.shape(*x), self.shape(*w));
                let (n, d, u) = (xs[0], xs[1], ws[1]);
                if self.needs(*x) {
                    let mut dx = vec![0.0; n * d];
                    gemm(n, u, d, &g, false, self.value(*w).data(), true, 0.0, &mut dx);
                    put(*x, Owned(dx));
                }
                if self.needs(*w) {
                    let mut dw = vec![0.0; d * u];
                    gemm(d, n, u, self.value(*x).data(), true, &g, false, 0.0, &mut dw);
                    put(*w, Owned(dw));
                }
                let mut db = vec![0.0; u];
                for row in g.chunks(u) {
                    db.iter_mut().zip(row).for_each(|(d, r)| *d += r);
                }
                put(*b, Owned(db));
            }
            Op::Relu { x } => {
                let xv = self.value(*x).data();
                let dx = g.iter().zip(xv).map(|(gi, xi)| if *xi > 0.0 { *gi } else { 0.0 }).collect();
                put(*x, Owned(dx));
            }
            Op::Sigmoid { x } => {
                let y = self.value(Var(idx)).data();
                let dx = g.iter().zip(y).map(|(gi, yi)| gi * yi * (1.0 - yi)).collect();
                put(*x, Owned(dx));
            }
            Op::Dropout { x, mask } => put(*x, Owned(g.iter().zip(mask).map(|(gi, m)| gi * m).collect())),
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                let n = labels.len();
                let k = probs.len() / n;
                let scale = g[0] / n as f64;
                let mut dl: Vec<f64> = probs.iter().map(|p| scale * p).collect();
                for (i, &label) in labels.iter().enumerate() {
                    dl[i * k + label] = scale * (probs[i * k + label] - 1.0);
                }
                put(*logits, Owned(dl));
            }
            Op::Mse { pred, target } => {
                let (p, t) = (self.value(*pred).data(), self.value(*target).data());
                let scale = 2.0 * g[0] / p.len() as f64;
                if self.needs(*target) {
                    put(*target, Owned(p.iter().zip(t).map(|(a, b)| -(scale * (a - b))).collect()));
                }
                put(*pred, Owned(p.iter().zip(t).map(|(a, b)| scale * (a - b)).collect()));
            }
            Op::Sum { x } => {
                let len = self.value(*x).numel();
                put(*x, Owned(vec![g[0]; len]));
            }
            Op::Scale { x, factor } => put(*x, Owned(g.iter().map(|gi| gi * factor).collect())),
            Op::Add { a, b } => {
                if self.needs(*a) {
                    put(*a, Owned(g.clone()));
                }
                put(*b, Owned(g));
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if self.needs(*a) {
                    put(*a, Owned(g.iter().zip(bv).map(|(gi, y)| gi * y).collect()));
                }
                if self.needs(*b) {
                    put(*b, Owned(g.iter().zip(av).map(|(gi, y)| gi * y).collect()));
                }
            }
            Op::Reshape { x } => put(*x, Owned(g)),
            Op::Concat { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).numel();
                    if self.needs(p) {
                        put(p, Owned(g[offset..offset + len].to_vec()));
                    }
                    offset += len;
                }
            }
        }
    }
}

/// A gradient contribution: either a finished buffer or an in-place update
/// of a zero-initialised one.
enum Contribution<'a> {
    Owned(Vec<f64>),
    Scatter(&'a dyn Fn(&mut [f64])),
}

fn add_into(src: &[f64]) -> impl Fn(&mut [f64]) + '_ {
    move |dst: &mut [f64]| dst.iter_mut().zip(src).for_each(|(d, s)| *d += s)
}

/// Logistic function evaluated without overflow for large `|x|`.
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
