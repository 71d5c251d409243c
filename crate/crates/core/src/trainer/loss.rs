use crate::engine::{Tape, Var};
use crate::error::{Error, Result};

/// Weights of the linear blend `alpha · L_A + beta · L_B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CombinedLossParams {
    pub alpha: f64,
    pub beta: f64,
}

impl CombinedLossParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if self.alpha + self.beta <= 0.0 {
            return Err(Error::InvalidArgument("alpha + beta must be positive".into()));
        }
        Ok(())
    }
}

/// Linear interpolation of the loss weights from a start pair to an end pair
/// across the epochs of a run. Without an end pair the weights are constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSchedule {
    pub start: CombinedLossParams,
    pub end: Option<CombinedLossParams>,
}

impl LossSchedule {
    pub fn constant(params: CombinedLossParams) -> Self {
        Self {
            start: params,
            end: None,
        }
    }

    /// Weights for 1-based `epoch` of `epochs`.
    pub fn at(&self, epoch: usize, epochs: usize) -> CombinedLossParams {
        match self.end {
            None => self.start,
            Some(end) => {
                let t = if epochs <= 1 {
                    0.0
                } else {
                    (epoch.saturating_sub(1)) as f64 / (epochs - 1) as f64
                };
                let lerp = |a: f64, b: f64| a + (b - a) * t;
                CombinedLossParams {
                    alpha: lerp(self.start.alpha, end.alpha),
                    beta: lerp(self.start.beta, end.beta),
                }
            }
        }
    }
}

fn check_losses(loss_a: f64, loss_b: f64) -> Result<()> {
    for (name, v) in [("loss_a", loss_a), ("loss_b", loss_b)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidArgument(format!("{name} = {v} must be finite and >= 0")));
        }
    }
    Ok(())
}

/// `alpha · loss_a + beta · loss_b` on plain numbers.
pub fn combined_loss_value(loss_a: f64, loss_b: f64, params: &CombinedLossParams) -> Result<f64> {
    check_losses(loss_a, loss_b)?;
    Ok(params.alpha * loss_a + params.beta * loss_b)
}

/// Differentiable `alpha · loss_a + beta · loss_b` on scalar tape nodes.
/// Produces the same bits as [`combined_loss_value`].
pub fn combined_loss(tape: &mut Tape<'_>, loss_a: Var, loss_b: Var, params: &CombinedLossParams) -> Result<Var> {
    check_losses(tape.value(loss_a).item()?, tape.value(loss_b).item()?)?;
    let a = tape.scale(loss_a, params.alpha)?;
    let b = tape.scale(loss_b, params.beta)?;
    tape.add(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{ParamStore, Tensor};

    #[test]
    fn examples() {
        let p = CombinedLossParams::new(0.3, 0.7).unwrap();
        assert!((combined_loss_value(2.0, 1.0, &p).unwrap() - 1.3).abs() < 1e-15);
        let q = CombinedLossParams::new(0.7, 0.3).unwrap();
        assert!((combined_loss_value(1.0, 1.0, &q).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_alpha_cuts_reconstruction_gradient() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let la = tape.leaf(Tensor::scalar(2.0).with_requires_grad(true));
        let lb = tape.leaf(Tensor::scalar(1.5).with_requires_grad(true));
        let p = CombinedLossParams::new(0.0, 0.7).unwrap();
        let total = combined_loss(&mut tape, la, lb, &p).unwrap();
        assert_eq!(tape.value(total).item().unwrap(), 0.7 * 1.5);
        let g = tape.backward(total).unwrap();
        assert_eq!(g.of(la).unwrap(), &[0.0]);
        assert_eq!(g.of(lb).unwrap(), &[0.7]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = CombinedLossParams::new(0.3, 0.7).unwrap();
        assert!(combined_loss_value(f64::NAN, 1.0, &p).is_err());
        assert!(combined_loss_value(1.0, f64::INFINITY, &p).is_err());
        assert!(CombinedLossParams::new(0.0, 0.0).is_err());
        assert!(CombinedLossParams::new(-0.1, 1.0).is_err());
        assert!(CombinedLossParams::new(2.0, 3.0).is_ok());
    }

    #[test]
    fn schedule_interpolates_linearly() {
        let s = LossSchedule {
            start: CombinedLossParams::new(0.2, 0.8).unwrap(),
            end: Some(CombinedLossParams::new(0.6, 0.4).unwrap()),
        };
        assert_eq!(s.at(1, 5), s.start);
        let last = s.at(5, 5);
        assert!((last.alpha - 0.6).abs() < 1e-15 && (last.beta - 0.4).abs() < 1e-15);
        assert!((s.at(3, 5).alpha - 0.4).abs() < 1e-15);
        let c = LossSchedule::constant(s.start);
        assert_eq!(c.at(4, 5), s.start);
    }
}
