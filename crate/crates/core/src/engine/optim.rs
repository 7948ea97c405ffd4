use serde::{Deserialize, Serialize};

use super::params::ParameterSet;
use super::scalar::Scalar;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-7;
pub const RMSPROP_DECAY: f64 = 0.9;
pub const RMSPROP_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    Rmsprop,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 3] = [OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::Rmsprop];

    pub fn code(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Rmsprop => "rmsprop",
        }
    }
}

/// Optimizer with its per-parameter accumulators.
#[derive(Debug, Clone)]
pub struct OptimizerState<T = f32> {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Adam first moment; empty for the others.
    first: Vec<T>,
    /// Adam second moment or RMSProp mean square; empty for SGD.
    second: Vec<T>,
    pub step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(kind: OptimizerKind, learning_rate: f64, num_params: usize) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::validation(format!("learning rate {learning_rate} is not positive")));
        }
        let (first, second) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => (vec![T::zero(); num_params], vec![T::zero(); num_params]),
            OptimizerKind::Rmsprop => (Vec::new(), vec![T::zero(); num_params]),
        };
        Ok(OptimizerState {
            kind,
            learning_rate,
            first,
            second,
            step: 0,
        })
    }

    /// Apply one update in place. Fails with [`Error::Unstable`] when the
    /// updated parameters are not all finite.
    pub fn step(&mut self, params: &mut ParameterSet<T>, grads: &ParameterSet<T>) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::validation("parameter and gradient lengths differ"));
        }
        if !self.second.is_empty() && self.second.len() != params.len() {
            return Err(Error::validation("optimizer state has the wrong length"));
        }
        self.step += 1;
        let lr = T::of(self.learning_rate);
        let p = params.as_mut_slice();
        let g = grads.as_slice();
        match self.kind {
            OptimizerKind::Sgd => {
                for (w, &d) in p.iter_mut().zip(g) {
                    *w -= lr * d;
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let b1 = T::of(ADAM_BETA1);
                let b2 = T::of(ADAM_BETA2);
                let c1 = T::of(1.0 - ADAM_BETA1.powi(t));
                let c2 = T::of(1.0 - ADAM_BETA2.powi(t));
                let eps = T::of(ADAM_EPSILON);
                let one = T::one();
                for (((w, &d), m), v) in p.iter_mut().zip(g).zip(&mut self.first).zip(&mut self.second) {
                    *m = b1 * *m + (one - b1) * d;
                    *v = b2 * *v + (one - b2) * d * d;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
            OptimizerKind::Rmsprop => {
                let rho = T::of(RMSPROP_DECAY);
                let eps = T::of(RMSPROP_EPSILON);
                let one = T::one();
                for ((w, &d), v) in p.iter_mut().zip(g).zip(&mut self.second) {
                    *v = rho * *v + (one - rho) * d * d;
                    *w -= lr * d / (v.sqrt() + eps);
                }
            }
        }
        if !params.all_finite() {
            return Err(Error::Unstable(format!("non-finite parameters after step {}", self.step)));
        }
        Ok(())
    }
}
