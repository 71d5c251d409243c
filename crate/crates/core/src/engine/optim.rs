use std::collections::BTreeMap;

use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

/// Stochastic gradient descent with Nesterov momentum, look-ahead form:
///
/// ```text
/// v ← μ·v − lr·g
/// w ← w + μ·v − lr·g
/// ```
#[derive(Clone, Debug)]
pub struct SgdNesterov {
    learning_rate: f64,
    momentum: f64,
    velocity: BTreeMap<ParamId, Vec<f64>>,
}

impl SgdNesterov {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {learning_rate} must be positive")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!("momentum {momentum} must lie in [0, 1)")));
        }
        Ok(Self {
            learning_rate,
            momentum,
            velocity: BTreeMap::new(),
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn velocity(&self, id: ParamId) -> Option<&[f64]> {
        self.velocity.get(&id).map(Vec::as_slice)
    }

    /// Updates every listed parameter from its accumulated gradient, then clears
    /// the gradients. Fails before touching anything if a gradient is missing.
    pub fn step(&mut self, store: &mut ParamStore, ids: &[ParamId]) -> Result<()> {
        if let Some(&id) = ids.iter().find(|&&id| store.tensor(id).grad().is_none()) {
            return Err(Error::MissingGrad(store.name(id).to_string()));
        }
        let (lr, mu) = (self.learning_rate, self.momentum);
        for &id in ids {
            let tensor = store.tensor_mut(id);
            let grad = tensor.take_grad().expect("checked above");
            let v = self.velocity.entry(id).or_insert_with(|| vec![0.0; grad.len()]);
            for ((w, v), g) in tensor.data_mut().iter_mut().zip(v.iter_mut()).zip(&grad) {
                *v = mu * *v - lr * g;
                *w += mu * *v - lr * g;
            }
        }
        Ok(())
    }
}
