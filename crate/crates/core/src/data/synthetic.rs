//! Two-class shape dataset: class 0 draws a bright axis-aligned rectangle,
//! class 1 a bright disc, each on a dark noisy background with jittered
//! position, size and contrast.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{Dataset, Sample};
use crate::engine::Tensor;
use crate::error::{Error, Result};

pub const CLASS_NAMES: [&str; 2] = ["rectangle", "disc"];

/// Generator knobs; sizes are fractions of the image side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub height: usize,
    pub width: usize,
    pub noise_std: f64,
    pub background: (f64, f64),
    pub foreground: (f64, f64),
    pub rect_side: (f64, f64),
    pub disc_radius: (f64, f64),
}

impl SyntheticSpec {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            noise_std: 0.15,
            background: (0.05, 0.3),
            foreground: (0.45, 0.9),
            rect_side: (0.2, 0.5),
            disc_radius: (0.1, 0.25),
        }
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn render<R: Rng>(spec: &SyntheticSpec, class: usize, rng: &mut R) -> Result<Tensor> {
    let (h, w) = (spec.height, spec.width);
    let side = h.min(w) as f64;
    let bg = uniform(rng, spec.background);
    let fg = uniform(rng, spec.foreground);
    let inside: Box<dyn Fn(f64, f64) -> bool> = if class == 0 {
        let rh = (uniform(rng, spec.rect_side) * h as f64).max(2.0);
        let rw = (uniform(rng, spec.rect_side) * w as f64).max(2.0);
        let top = uniform(rng, (0.0, h as f64 - rh));
        let left = uniform(rng, (0.0, w as f64 - rw));
        Box::new(move |y, x| y >= top && y < top + rh && x >= left && x < left + rw)
    } else {
        let r = (uniform(rng, spec.disc_radius) * side).max(1.5);
        let cy = uniform(rng, (r, h as f64 - r));
        let cx = uniform(rng, (r, w as f64 - r));
        Box::new(move |y, x| (y - cy).powi(2) + (x - cx).powi(2) <= r * r)
    };
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let base = if inside(y as f64 + 0.5, x as f64 + 0.5) { fg } else { bg };
            data.push((base + noise.sample(rng)).clamp(0.0, 1.0));
        }
    }
    Tensor::new(vec![1, h, w], data)
}

/// `n_per_class` samples of each class, interleaved, deterministic in `seed`.
pub fn gen_synthetic(n_per_class: usize, spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be positive".into()));
    }
    if spec.height < 4 || spec.width < 4 {
        return Err(Error::InvalidArgument("synthetic images must be at least 4x4".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(2 * n_per_class);
    for _ in 0..n_per_class {
        for class in 0..2 {
            samples.push(Sample {
                image: render(spec, class, &mut rng)?,
                label: class,
                subject: None,
            });
        }
    }
    Dataset::new(samples, CLASS_NAMES.iter().map(|s| s.to_string()).collect())
}
