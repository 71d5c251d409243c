use crate::engine::Tensor;

/// Output format for [`preprocess`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PreprocessTarget {
    pub grayscale: bool,
    pub height: usize,
    pub width: usize,
}

pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Luminance of a `[3, h, w]` image; single-channel images pass through.
pub fn to_grayscale(image: &Tensor) -> Tensor {
    let s = image.shape();
    if s[0] != 3 {
        return image.clone();
    }
    let plane = s[1] * s[2];
    let d = image.data();
    let gray = (0..plane)
        .map(|i| LUMA[0] * d[i] + LUMA[1] * d[plane + i] + LUMA[2] * d[2 * plane + i])
        .collect();
    Tensor::new(vec![1, s[1], s[2]], gray).expect("same plane size")
}

/// Bilinear resize with corner-aligned sampling, so corner pixels are kept
/// exactly and resizing to the current size is the identity.
pub fn resize_bilinear(image: &Tensor, height: usize, width: usize) -> Tensor {
    let s = image.shape();
    let (c, ih, iw) = (s[0], s[1], s[2]);
    if (ih, iw) == (height, width) {
        return image.clone();
    }
    let src_coord = |o: usize, out: usize, inp: usize| -> f64 {
        if out <= 1 {
            0.0
        } else {
            o as f64 * (inp - 1) as f64 / (out - 1) as f64
        }
    };
    let d = image.data();
    let mut out = Vec::with_capacity(c * height * width);
    for ch in 0..c {
        let plane = &d[ch * ih * iw..(ch + 1) * ih * iw];
        for y in 0..height {
            let sy = src_coord(y, height, ih);
            let y0 = (sy.floor() as usize).min(ih - 1);
            let y1 = (y0 + 1).min(ih - 1);
            let fy = sy - y0 as f64;
            for x in 0..width {
                let sx = src_coord(x, width, iw);
                let x0 = (sx.floor() as usize).min(iw - 1);
                let x1 = (x0 + 1).min(iw - 1);
                let fx = sx - x0 as f64;
                let top = plane[y0 * iw + x0] * (1.0 - fx) + plane[y0 * iw + x1] * fx;
                let bottom = plane[y1 * iw + x0] * (1.0 - fx) + plane[y1 * iw + x1] * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Tensor::new(vec![c, height, width], out).expect("sized above")
}

pub fn clip_unit(image: &Tensor) -> Tensor {
    let data = image.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Tensor::new(image.shape().to_vec(), data).expect("same shape")
}

/// Optional grayscale conversion, bilinear resize, clip to `[0, 1]`.
pub fn preprocess(image: &Tensor, target: &PreprocessTarget) -> Tensor {
    let img = if target.grayscale {
        to_grayscale(image)
    } else {
        image.clone()
    };
    clip_unit(&resize_bilinear(&img, target.height, target.width))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_is_white_in_gray() {
        let white = Tensor::full(&[3, 2, 2], 1.0);
        let g = to_grayscale(&white);
        assert_eq!(g.shape(), &[1, 2, 2]);
        assert!(g.data().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn identity_resize_is_bit_exact() {
        let img = Tensor::new(vec![1, 2, 3], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let target = PreprocessTarget {
            grayscale: false,
            height: 2,
            width: 3,
        };
        assert_eq!(preprocess(&img, &target), img);
    }

    #[test]
    fn checkerboard_upsize_keeps_corners() {
        let board = Tensor::new(vec![1, 2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let up = resize_bilinear(&board, 4, 4);
        let d = up.data();
        assert_eq!((d[0], d[3], d[12], d[15]), (0.0, 1.0, 1.0, 0.0));
        // hand bilinear: (1,1) samples (1/3, 1/3) → 2·(1/3)(2/3) = 4/9
        assert!((d[5] - 4.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn preprocess_is_idempotent_at_target() {
        let img = Tensor::new(vec![3, 3, 3], (0..27).map(|i| i as f64 / 26.0).collect()).unwrap();
        let target = PreprocessTarget {
            grayscale: true,
            height: 4,
            width: 4,
        };
        let once = preprocess(&img, &target);
        assert_eq!(preprocess(&once, &target), once);
    }
}
