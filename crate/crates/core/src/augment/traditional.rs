//! Fixed geometric and photometric augmentations: horizontal flip, 3×3
//! Gaussian blur and small rotations, applied as a full grid.
//!
//! Each variant applies flip, then rotation, then blur, then clips to [0, 1].

use crate::data::{Dataset, Sample};
use crate::engine::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TraditionalAugConfig {
    pub flips: Vec<bool>,
    pub blurs: Vec<bool>,
    pub rotations_deg: Vec<f64>,
}

impl TraditionalAugConfig {
    /// {no flip, flip} × {no blur, blur} × {-5, -2, 0, 2, 5} degrees.
    pub fn standard_grid() -> Self {
        Self {
            flips: vec![false, true],
            blurs: vec![false, true],
            rotations_deg: vec![-5.0, -2.0, 0.0, 2.0, 5.0],
        }
    }

    pub fn variant_count(&self) -> usize {
        self.flips.len() * self.blurs.len() * self.rotations_deg.len()
    }

    fn validate(&self) -> Result<()> {
        if self.variant_count() == 0 {
            return Err(Error::InvalidArgument("traditional augmentation grid is empty".into()));
        }
        if let Some(r) = self.rotations_deg.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidArgument(format!("rotation {r} is not finite")));
        }
        Ok(())
    }
}

fn dims(image: &Tensor) -> (usize, usize, usize) {
    let s = image.shape();
    (s[0], s[1], s[2])
}

pub fn flip_horizontal(image: &Tensor) -> Tensor {
    let (_, _, w) = dims(image);
    let mut out = image.clone();
    for (row_out, row_in) in out.data_mut().chunks_mut(w).zip(image.data().chunks(w)) {
        for (o, v) in row_out.iter_mut().zip(row_in.iter().rev()) {
            *o = *v;
        }
    }
    out
}

/// Rotates about the image centre with bilinear sampling; pixels that map
/// outside the source are zero. A zero angle returns the input unchanged.
pub fn rotate(image: &Tensor, degrees: f64) -> Tensor {
    if degrees == 0.0 {
        return image.clone();
    }
    let (c, h, w) = dims(image);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let src = image.data();
    let mut out = Tensor::zeros(image.shape());
    let data = out.data_mut();
    for y in 0..h {
        for x in 0..w {
            let (dy, dx) = (y as f64 - cy, x as f64 - cx);
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            for ch in 0..c {
                let plane = &src[ch * h * w..(ch + 1) * h * w];
                let at = |yy: f64, xx: f64| -> f64 {
                    if yy < 0.0 || xx < 0.0 || yy >= h as f64 || xx >= w as f64 {
                        0.0
                    } else {
                        plane[yy as usize * w + xx as usize]
                    }
                };
                data[ch * h * w + y * w + x] = (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1.0))
                    + fy * ((1.0 - fx) * at(y0 + 1.0, x0) + fx * at(y0 + 1.0, x0 + 1.0));
            }
        }
    }
    out
}

/// 3×3 Gaussian blur with σ = 1, replicating edge pixels.
pub fn gaussian_blur3(image: &Tensor) -> Tensor {
    let (c, h, w) = dims(image);
    let g = [(-0.5f64).exp(), 1.0, (-0.5f64).exp()];
    let norm: f64 = g.iter().sum::<f64>().powi(2);
    let src = image.data();
    let mut out = Tensor::zeros(image.shape());
    let data = out.data_mut();
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, gy) in g.iter().enumerate() {
                    let yy = (y + i).saturating_sub(1).min(h - 1);
                    for (j, gx) in g.iter().enumerate() {
                        let xx = (x + j).saturating_sub(1).min(w - 1);
                        acc += gy * gx * plane[yy * w + xx];
                    }
                }
                data[ch * h * w + y * w + x] = acc / norm;
            }
        }
    }
    out
}

fn clip(mut t: Tensor) -> Tensor {
    t.data_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    t
}

/// Every variant of one `[c, h, w]` image, ordered flip-major, then blur,
/// then rotation.
pub fn traditional_variants(image: &Tensor, config: &TraditionalAugConfig) -> Result<Vec<Tensor>> {
    config.validate()?;
    if image.rank() != 3 {
        return Err(Error::shape("traditional_variants", format!("expected [c,h,w], got {:?}", image.shape())));
    }
    let mut out = Vec::with_capacity(config.variant_count());
    for &flip in &config.flips {
        let flipped = if flip { flip_horizontal(image) } else { image.clone() };
        for &blur in &config.blurs {
            for &deg in &config.rotations_deg {
                let rotated = rotate(&flipped, deg);
                let v = if blur { gaussian_blur3(&rotated) } else { rotated };
                out.push(clip(v));
            }
        }
    }
    Ok(out)
}

/// Replaces every sample by all of its variants; labels and subjects carry over.
pub fn traditional_expand(dataset: &Dataset, config: &TraditionalAugConfig) -> Result<Dataset> {
    let mut samples = Vec::with_capacity(dataset.len() * config.variant_count());
    for s in dataset.samples() {
        for image in traditional_variants(&s.image, config)? {
            samples.push(Sample {
                image,
                label: s.label,
                subject: s.subject.clone(),
            });
        }
    }
    Dataset::new(samples, dataset.class_names().to_vec())
}
