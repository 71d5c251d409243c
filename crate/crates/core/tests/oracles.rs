//! Independent oracles: a hand-written shape classifier for the synthetic
//! generator and structural properties of the networks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smartaug::data::{gen_synthetic, SyntheticSpec};
use smartaug::engine::{Mode, ParamStore, Tape, Tensor};
use smartaug::models::{build_network_b1, ClassifierArch};

/// Thresholds halfway between the darkest and brightest pixel and calls the
/// shape a rectangle when all four corners of its bounding box are lit; a
/// disc of radius three pixels or more never reaches its box corners.
fn template_class(img: &[f64], h: usize, w: usize) -> usize {
    let lo = img.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = img.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let t = (lo + hi) / 2.0;
    let fg = |y: usize, x: usize| img[y * w + x] > t;
    let rows: Vec<usize> = (0..h).filter(|&y| (0..w).any(|x| fg(y, x))).collect();
    let cols: Vec<usize> = (0..w).filter(|&x| (0..h).any(|y| fg(y, x))).collect();
    let (Some(&top), Some(&bottom), Some(&left), Some(&right)) = (rows.first(), rows.last(), cols.first(), cols.last()) else {
        return 1;
    };
    if fg(top, left) && fg(top, right) && fg(bottom, left) && fg(bottom, right) {
        0
    } else {
        1
    }
}

#[test]
fn noiseless_shapes_match_their_labels() {
    let spec = SyntheticSpec {
        noise_std: 0.0,
        background: (0.1, 0.1),
        foreground: (0.8, 0.8),
        ..SyntheticSpec::new(32, 32)
    };
    for seed in [1, 2] {
        let ds = gen_synthetic(300, &spec, seed).unwrap();
        let correct = ds
            .samples()
            .iter()
            .filter(|s| template_class(s.image.data(), 32, 32) == s.label)
            .count();
        let acc = correct as f64 / ds.len() as f64;
        assert_eq!(acc, 1.0, "seed {seed}: template accuracy {acc}");
    }
}

#[test]
fn inference_logits_do_not_depend_on_the_batch() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut b = build_network_b1(&mut store, "b", 1, 2, (16, 16), ClassifierArch::default(), &mut rng).unwrap();
    let ds = gen_synthetic(2, &SyntheticSpec::new(16, 16), 9).unwrap();
    let (images, _) = ds.batch(&[0, 1, 2, 3]).unwrap();
    let mut tape = Tape::new(&store);
    let x = tape.input(images.clone());
    let all = b.forward(&mut tape, x, Mode::Infer, &mut rng).unwrap();
    let all = tape.value(all).clone();
    for i in 0..4 {
        let mut tape = Tape::new(&store);
        let x = tape.input(ds.batch(&[i]).unwrap().0);
        let one = b.forward(&mut tape, x, Mode::Infer, &mut rng).unwrap();
        for (p, q) in tape.value(one).data().iter().zip(&all.data()[2 * i..2 * i + 2]) {
            assert!((p - q).abs() <= 1e-12 * q.abs().max(1.0), "sample {i}: {p} vs {q}");
        }
    }
}

#[test]
fn dropout_preserves_mean_in_expectation() {
    let store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tape = Tape::new(&store);
    let x = tape.input(Tensor::full(&[10_000], 2.0));
    let y = tape.dropout(x, 0.5, Mode::Train, &mut rng).unwrap();
    let mean = tape.value(y).data().iter().sum::<f64>() / 10_000.0;
    assert!((mean - 2.0).abs() < 0.1, "mean {mean}");
}
