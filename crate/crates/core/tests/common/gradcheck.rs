//! Central finite-difference gradient checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smartaug::engine::{ParamStore, Tape, Tensor, Var};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// Gradients whose norms are both below this are finite-difference noise
/// around an exact zero (e.g. a conv bias feeding batch normalization).
pub const ZERO_FLOOR: f64 = 1e-7;

/// `‖a − n‖ / (‖a‖ + ‖n‖)`, zero when both are below [`ZERO_FLOOR`].
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()) + norm(&mut numeric.iter().copied());
    if scale < ZERO_FLOOR {
        0.0
    } else {
        diff / scale
    }
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Values bounded away from zero and from each other, so ReLU kinks and
/// max-pool ties stay out of reach of the finite-difference step.
pub fn spread_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let mut vals: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64 * 2.0 - 1.0).collect();
    for i in (1..n).rev() {
        vals.swap(i, rng.gen_range(0..=i));
    }
    Tensor::new(shape.to_vec(), vals).unwrap()
}

/// Checks the gradient of a scalar function of `inputs` against central
/// differences. `f` must be deterministic. Returns the worst relative error.
pub fn check_inputs(inputs: &[Tensor], f: impl Fn(&mut Tape<'_>, &[Var]) -> Var) -> f64 {
    let store = ParamStore::new();
    let eval = |xs: &[Tensor]| -> f64 {
        let mut tape = Tape::new(&store);
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone().with_requires_grad(true))).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).item().unwrap()
    };
    let mut tape = Tape::new(&store);
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone().with_requires_grad(true))).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out).unwrap();
    let mut worst: f64 = 0.0;
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.of(*v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; inputs[i].numel()]);
        let mut numeric = vec![0.0; inputs[i].numel()];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let mut xs = inputs.to_vec();
            xs[i].data_mut()[j] += STEP;
            let up = eval(&xs);
            xs[i].data_mut()[j] -= 2.0 * STEP;
            let down = eval(&xs);
            *slot = (up - down) / (2.0 * STEP);
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

/// Same check over every parameter of `store`.
pub fn check_params(store: &ParamStore, f: impl Fn(&mut Tape<'_>) -> Var) -> f64 {
    let eval = |s: &ParamStore| -> f64 {
        let mut tape = Tape::new(s);
        let out = f(&mut tape);
        tape.value(out).item().unwrap()
    };
    let mut tape = Tape::new(store);
    let out = f(&mut tape);
    let grads = tape.backward(out).unwrap();
    let mut worst: f64 = 0.0;
    for id in store.ids() {
        let n = store.tensor(id).numel();
        let analytic = grads.param(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
        let mut numeric = vec![0.0; n];
        let mut s = store.clone();
        for (j, slot) in numeric.iter_mut().enumerate() {
            let orig = s.tensor(id).data()[j];
            s.tensor_mut(id).data_mut()[j] = orig + STEP;
            let up = eval(&s);
            s.tensor_mut(id).data_mut()[j] = orig - STEP;
            let down = eval(&s);
            s.tensor_mut(id).data_mut()[j] = orig;
            *slot = (up - down) / (2.0 * STEP);
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
