//! Convolution (im2col + GEMM) and 2×2 max-pooling kernels.

use super::linalg::gemm;

/// Spatial padding mode for [`conv2d`](super::Tape::conv2d).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero-filled border keeping the output the size of the input.
    Same,
    /// No padding; the output shrinks by `kernel - 1`.
    Valid,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub f: usize,
    pub kh: usize,
    pub kw: usize,
    pub pad_h: usize,
    pub pad_w: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    fn patch_len(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn columns(&self) -> usize {
        self.n * self.oh * self.ow
    }
}

/// Unfolds `x` into a `(c·kh·kw) × (n·oh·ow)` patch matrix.
pub(crate) fn im2col(g: &ConvGeom, x: &[f64]) -> Vec<f64> {
    let ncols = g.columns();
    let mut cols = vec![0.0; g.patch_len() * ncols];
    for ci in 0..g.c {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * ncols..(row + 1) * ncols];
                for ni in 0..g.n {
                    let src = &x[(ni * g.c + ci) * g.h * g.w..(ni * g.c + ci + 1) * g.h * g.w];
                    for oy in 0..g.oh {
                        let iy = (oy + ki) as isize - g.pad_h as isize;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        let src_row = &src[iy as usize * g.w..(iy as usize + 1) * g.w];
                        let base = (ni * g.oh + oy) * g.ow;
                        for ox in 0..g.ow {
                            let ix = (ox + kj) as isize - g.pad_w as isize;
                            if ix >= 0 && ix < g.w as isize {
                                dst[base + ox] = src_row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-adds a patch-matrix gradient back onto the input layout.
fn col2im(g: &ConvGeom, dcols: &[f64], dx: &mut [f64]) {
    let ncols = g.columns();
    for ci in 0..g.c {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let src = &dcols[row * ncols..(row + 1) * ncols];
                for ni in 0..g.n {
                    let plane = (ni * g.c + ci) * g.h * g.w;
                    for oy in 0..g.oh {
                        let iy = (oy + ki) as isize - g.pad_h as isize;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        let base = (ni * g.oh + oy) * g.ow;
                        let dst_row = plane + iy as usize * g.w;
                        for ox in 0..g.ow {
                            let ix = (ox + kj) as isize - g.pad_w as isize;
                            if ix >= 0 && ix < g.w as isize {
                                dx[dst_row + ix as usize] += src[base + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Layers with at most this many `in × out` channel pairs use the direct
/// kernels; wider ones go through im2col + GEMM.
pub(crate) const DIRECT_MAX_CHANNEL_PAIRS: usize = 64;

impl ConvGeom {
    pub(crate) fn prefers_direct(&self) -> bool {
        self.c * self.f <= DIRECT_MAX_CHANNEL_PAIRS
    }
}

/// Convolution output, with the patch matrix when the GEMM path produced one.
pub(crate) fn conv2d_forward(g: &ConvGeom, x: &[f64], weight: &[f64], bias: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
    if g.prefers_direct() {
        (direct_forward(g, x, weight, bias), None)
    } else {
        let (out, cols) = gemm_forward(g, x, weight, bias);
        (out, Some(cols))
    }
}

/// Padded-plane geometry for the direct kernels: every plane is stored with
/// row stride `wp = w + 2·pad_w`, so tap `(ki, kj)` of output position `i`
/// reads padded input position `i + ki·wp + kj`. Output rows are computed at
/// the full padded stride; columns at or beyond `ow` are scratch.
struct Padded {
    wp: usize,
    /// Padded input plane length, including `kw` slack for scratch columns.
    in_len: usize,
    /// Output plane length at stride `wp`.
    out_len: usize,
}

impl Padded {
    fn new(g: &ConvGeom) -> Self {
        let wp = g.w + 2 * g.pad_w;
        let hp = g.h + 2 * g.pad_h;
        Self {
            wp,
            in_len: hp * wp + g.kw,
            out_len: g.oh * wp,
        }
    }

    fn pad_plane(&self, g: &ConvGeom, src: &[f64], dst: &mut [f64]) {
        dst.iter_mut().for_each(|v| *v = 0.0);
        for y in 0..g.h {
            let row = (y + g.pad_h) * self.wp + g.pad_w;
            dst[row..row + g.w].copy_from_slice(&src[y * g.w..(y + 1) * g.w]);
        }
    }

    fn offset(&self, ki: usize, kj: usize) -> usize {
        ki * self.wp + kj
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (b, a) in y.iter_mut().zip(x) {
        *b += alpha * a;
    }
}

/// Eight interleaved partial sums, so the reduction vectorizes.
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    let (x, y) = (&x[..n], &y[..n]);
    let mut acc = [0.0; 8];
    let (xc, yc) = (x.chunks_exact(8), y.chunks_exact(8));
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in xc.zip(yc) {
        for k in 0..8 {
            acc[k] += a[k] * b[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

pub(crate) fn direct_forward(g: &ConvGeom, x: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let p = Padded::new(g);
    let (ip, op) = (g.h * g.w, g.oh * g.ow);
    let mut xp = vec![0.0; g.c * p.in_len];
    let mut acc = vec![0.0; p.out_len];
    let mut out = vec![0.0; g.n * g.f * op];
    for ni in 0..g.n {
        for ci in 0..g.c {
            let src = &x[(ni * g.c + ci) * ip..(ni * g.c + ci + 1) * ip];
            p.pad_plane(g, src, &mut xp[ci * p.in_len..(ci + 1) * p.in_len]);
        }
        for fi in 0..g.f {
            acc.iter_mut().for_each(|v| *v = bias[fi]);
            for ci in 0..g.c {
                let plane = &xp[ci * p.in_len..(ci + 1) * p.in_len];
                for ki in 0..g.kh {
                    for kj in 0..g.kw {
                        let wv = weight[((fi * g.c + ci) * g.kh + ki) * g.kw + kj];
                        let off = p.offset(ki, kj);
                        axpy(wv, &plane[off..off + p.out_len], &mut acc);
                    }
                }
            }
            let dst = &mut out[(ni * g.f + fi) * op..(ni * g.f + fi + 1) * op];
            for oy in 0..g.oh {
                dst[oy * g.ow..(oy + 1) * g.ow].copy_from_slice(&acc[oy * p.wp..oy * p.wp + g.ow]);
            }
        }
    }
    out
}

pub(crate) fn direct_backward(g: &ConvGeom, grad_out: &[f64], x: &[f64], weight: &[f64], need: [bool; 3]) -> ConvGrads {
    let p = Padded::new(g);
    let (ip, op) = (g.h * g.w, g.oh * g.ow);
    let mut dx = need[0].then(|| vec![0.0; x.len()]);
    let mut dw = need[1].then(|| vec![0.0; weight.len()]);
    let mut xp = vec![0.0; g.c * p.in_len];
    let mut dxp = vec![0.0; g.c * p.in_len];
    // scratch columns stay zero so they contribute nothing
    let mut gp = vec![0.0; g.f * p.out_len];
    for ni in 0..g.n {
        for fi in 0..g.f {
            let src = &grad_out[(ni * g.f + fi) * op..(ni * g.f + fi + 1) * op];
            let dst = &mut gp[fi * p.out_len..(fi + 1) * p.out_len];
            for oy in 0..g.oh {
                dst[oy * p.wp..oy * p.wp + g.ow].copy_from_slice(&src[oy * g.ow..(oy + 1) * g.ow]);
            }
        }
        if dw.is_some() {
            for ci in 0..g.c {
                let src = &x[(ni * g.c + ci) * ip..(ni * g.c + ci + 1) * ip];
                p.pad_plane(g, src, &mut xp[ci * p.in_len..(ci + 1) * p.in_len]);
            }
        }
        if dx.is_some() {
            dxp.iter_mut().for_each(|v| *v = 0.0);
        }
        for fi in 0..g.f {
            let gr = &gp[fi * p.out_len..(fi + 1) * p.out_len];
            for ci in 0..g.c {
                for ki in 0..g.kh {
                    for kj in 0..g.kw {
                        let widx = ((fi * g.c + ci) * g.kh + ki) * g.kw + kj;
                        let off = ci * p.in_len + p.offset(ki, kj);
                        if let Some(dw) = dw.as_mut() {
                            dw[widx] += dot(gr, &xp[off..off + p.out_len]);
                        }
                        if dx.is_some() {
                            axpy(weight[widx], gr, &mut dxp[off..off + p.out_len]);
                        }
                    }
                }
            }
        }
        if let Some(dx) = dx.as_mut() {
            for ci in 0..g.c {
                let plane = &dxp[ci * p.in_len..(ci + 1) * p.in_len];
                let dst = &mut dx[(ni * g.c + ci) * ip..(ni * g.c + ci + 1) * ip];
                for y in 0..g.h {
                    let row = (y + g.pad_h) * p.wp + g.pad_w;
                    dst[y * g.w..(y + 1) * g.w].copy_from_slice(&plane[row..row + g.w]);
                }
            }
        }
    }
    let bias = need[2].then(|| {
        (0..g.f)
            .map(|fi| (0..g.n).map(|ni| grad_out[(ni * g.f + fi) * op..(ni * g.f + fi + 1) * op].iter().sum::<f64>()).sum())
            .collect()
    });
    ConvGrads {
        input: dx,
        weight: dw,
        bias,
    }
}

/// Output in `[n, f, oh, ow]` layout together with the patch matrix.
pub(crate) fn gemm_forward(g: &ConvGeom, x: &[f64], weight: &[f64], bias: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let cols = im2col(g, x);
    let ncols = g.columns();
    let mut out_mat = vec![0.0; g.f * ncols];
    gemm(g.f, g.patch_len(), ncols, weight, false, &cols, false, 0.0, &mut out_mat);

    let spatial = g.oh * g.ow;
    let mut out = vec![0.0; g.n * g.f * spatial];
    for ni in 0..g.n {
        for fi in 0..g.f {
            let src = &out_mat[fi * ncols + ni * spatial..fi * ncols + (ni + 1) * spatial];
            let dst = &mut out[(ni * g.f + fi) * spatial..(ni * g.f + fi + 1) * spatial];
            for (d, s) in dst.iter_mut().zip(src) {
                *d = s + bias[fi];
            }
        }
    }
    (out, cols)
}

pub(crate) struct ConvGrads {
    pub input: Option<Vec<f64>>,
    pub weight: Option<Vec<f64>>,
    pub bias: Option<Vec<f64>>,
}

pub(crate) fn gemm_backward(
    g: &ConvGeom,
    grad_out: &[f64],
    cols: &[f64],
    weight: &[f64],
    need: [bool; 3],
) -> ConvGrads {
    let ncols = g.columns();
    let spatial = g.oh * g.ow;
    // reorder [n, f, p] -> [f, n·p]
    let mut dmat = vec![0.0; g.f * ncols];
    for ni in 0..g.n {
        for fi in 0..g.f {
            let src = &grad_out[(ni * g.f + fi) * spatial..(ni * g.f + fi + 1) * spatial];
            dmat[fi * ncols + ni * spatial..fi * ncols + (ni + 1) * spatial].copy_from_slice(src);
        }
    }

    let input = need[0].then(|| {
        let mut dcols = vec![0.0; g.patch_len() * ncols];
        gemm(g.patch_len(), g.f, ncols, weight, true, &dmat, false, 0.0, &mut dcols);
        let mut dx = vec![0.0; g.n * g.c * g.h * g.w];
        col2im(g, &dcols, &mut dx);
        dx
    });
    let weight = need[1].then(|| {
        let mut dw = vec![0.0; g.f * g.patch_len()];
        gemm(g.f, ncols, g.patch_len(), &dmat, false, cols, true, 0.0, &mut dw);
        dw
    });
    let bias = need[2].then(|| (0..g.f).map(|fi| dmat[fi * ncols..(fi + 1) * ncols].iter().sum()).collect());
    ConvGrads { input, weight, bias }
}

/// 2×2, stride-2 max pooling. Returns the pooled values and, per output, the
/// flat input index of the winning element (first maximum in row-major order).
pub(crate) fn maxpool2_forward(n: usize, c: usize, h: usize, w: usize, x: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let candidates = [
                    base + 2 * oy * w + 2 * ox,
                    base + 2 * oy * w + 2 * ox + 1,
                    base + (2 * oy + 1) * w + 2 * ox,
                    base + (2 * oy + 1) * w + 2 * ox + 1,
                ];
                let mut best = candidates[0];
                for &idx in &candidates[1..] {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    (out, argmax)
}
