//! Per-channel batch normalization kernels over `[n, c, h, w]` layouts.

/// Per-channel mean and (biased) variance.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl ChannelStats {
    /// Mean 0, variance 1: the identity normalization.
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }

    /// Exponential moving average update `self ← (1 − momentum)·self + momentum·batch`.
    pub fn blend(&mut self, batch: &ChannelStats, momentum: f64) {
        for (r, b) in self.mean.iter_mut().zip(&batch.mean) {
            *r = (1.0 - momentum) * *r + momentum * b;
        }
        for (r, b) in self.var.iter_mut().zip(&batch.var) {
            *r = (1.0 - momentum) * *r + momentum * b;
        }
    }
}

pub(crate) struct NormForward {
    pub out: Vec<f64>,
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
}

fn channel_planes(n: usize, c: usize, spatial: usize, ch: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    (0..n).map(move |ni| {
        let start = (ni * c + ch) * spatial;
        start..start + spatial
    })
}

pub(crate) fn batch_stats(n: usize, c: usize, spatial: usize, x: &[f64]) -> ChannelStats {
    let m = (n * spatial) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ch in 0..c {
        let mu = channel_planes(n, c, spatial, ch).map(|r| x[r].iter().sum::<f64>()).sum::<f64>() / m;
        let v = channel_planes(n, c, spatial, ch)
            .map(|r| x[r].iter().map(|v| (v - mu) * (v - mu)).sum::<f64>())
            .sum::<f64>()
            / m;
        mean[ch] = mu;
        var[ch] = v;
    }
    ChannelStats { mean, var }
}

pub(crate) fn normalize(
    n: usize,
    c: usize,
    spatial: usize,
    x: &[f64],
    stats: &ChannelStats,
    gamma: &[f64],
    beta: &[f64],
    eps: f64,
) -> NormForward {
    let inv_std: Vec<f64> = stats.var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut xhat = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for ch in 0..c {
        for r in channel_planes(n, c, spatial, ch) {
            for i in r {
                let xh = (x[i] - stats.mean[ch]) * inv_std[ch];
                xhat[i] = xh;
                out[i] = gamma[ch] * xh + beta[ch];
            }
        }
    }
    NormForward { out, xhat, inv_std }
}

pub(crate) struct NormGrads {
    pub input: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Backward rule. With `batch_stats` the statistics are functions of the
/// input and contribute to its gradient; otherwise they are constants.
pub(crate) fn normalize_backward(
    n: usize,
    c: usize,
    spatial: usize,
    grad_out: &[f64],
    xhat: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
    batch_stats: bool,
) -> NormGrads {
    let m = (n * spatial) as f64;
    let mut input = vec![0.0; grad_out.len()];
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for ch in 0..c {
        let mut sum_dy = 0.0;
        let mut sum_dy_xhat = 0.0;
        for r in channel_planes(n, c, spatial, ch) {
            for i in r {
                sum_dy += grad_out[i];
                sum_dy_xhat += grad_out[i] * xhat[i];
            }
        }
        dgamma[ch] = sum_dy_xhat;
        dbeta[ch] = sum_dy;
        let scale = gamma[ch] * inv_std[ch];
        for r in channel_planes(n, c, spatial, ch) {
            for i in r {
                input[i] = if batch_stats {
                    scale * (grad_out[i] - sum_dy / m - xhat[i] * sum_dy_xhat / m)
                } else {
                    scale * grad_out[i]
                };
            }
        }
    }
    NormGrads {
        input,
        gamma: dgamma,
        beta: dbeta,
    }
}
