use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::TRAIN_FRACTIONS;
use crate::engine::{Activation, InitKind, OptimizerKind, MAX_DROPOUT};
use crate::error::{Error, Result};
use crate::rng;

pub const LEARNING_RATE_RANGE: (f64, f64) = (5e-4, 5e-2);
pub const L2_RANGE: (f64, f64) = (1e-8, 1e-2);
pub const INIT_VARIANCE_RANGE: (f64, f64) = (1e-3, 0.5);
pub const ACTIVATIONS: [Activation; 2] = [Activation::Relu, Activation::Tanh];

/// One training configuration of a zoo network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub l2_coeff: f64,
    pub dropout_rate: f64,
    pub init_variance: f64,
    pub init_type: InitKind,
    pub activation: Activation,
    pub train_fraction: f64,
    /// Drives initialization, dropout masks, subsampling and shuffling.
    pub seed: u64,
}

fn log_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    let v = rng.random_range(lo.ln()..=hi.ln()).exp();
    // exp(ln(x)) can land one ulp outside the interval.
    v.clamp(lo, hi)
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let within = |v: f64, (lo, hi): (f64, f64)| v.is_finite() && v >= lo && v <= hi;
        let fail = |what: &str, v: f64| Err(Error::validation(format!("{what} {v} outside its sweep range")));
        if !within(self.learning_rate, LEARNING_RATE_RANGE) {
            return fail("learning rate", self.learning_rate);
        }
        if !within(self.l2_coeff, L2_RANGE) {
            return fail("l2 coefficient", self.l2_coeff);
        }
        if !within(self.dropout_rate, (0.0, MAX_DROPOUT)) {
            return fail("dropout rate", self.dropout_rate);
        }
        if !within(self.init_variance, INIT_VARIANCE_RANGE) {
            return fail("init variance", self.init_variance);
        }
        if !TRAIN_FRACTIONS.contains(&self.train_fraction) {
            return fail("train fraction", self.train_fraction);
        }
        if !ACTIVATIONS.contains(&self.activation) {
            return Err(Error::validation("hidden activation must be relu or tanh"));
        }
        Ok(())
    }

    /// Everything except the seed, as exact bit patterns. Two networks with
    /// equal keys differ only in their random seed.
    pub fn config_key(&self) -> [u64; 8] {
        [
            self.optimizer.code() as u64,
            self.learning_rate.to_bits(),
            self.l2_coeff.to_bits(),
            self.dropout_rate.to_bits(),
            self.init_variance.to_bits(),
            self.init_type.code() as u64,
            ACTIVATIONS.iter().position(|&a| a == self.activation).unwrap_or(9) as u64,
            self.train_fraction.to_bits(),
        ]
    }
}

/// The `k`-th configuration of the sweep seeded by `sweep_seed`.
///
/// Optimizer, initializer, activation and train fraction are uniform choices;
/// learning rate, l2 coefficient and init variance are log-uniform; dropout is
/// uniform on [0, 0.7].
pub fn sample_hyperparams(sweep_seed: u64, k: u64) -> HyperParams {
    let mut r = rng::stream(sweep_seed, &[rng::tag::HYPERPARAMS, k]);
    let hp = HyperParams {
        optimizer: OptimizerKind::ALL[r.random_range(0..OptimizerKind::ALL.len())],
        learning_rate: log_uniform(&mut r, LEARNING_RATE_RANGE),
        l2_coeff: log_uniform(&mut r, L2_RANGE),
        dropout_rate: r.random_range(0.0..=MAX_DROPOUT),
        init_variance: log_uniform(&mut r, INIT_VARIANCE_RANGE),
        init_type: InitKind::ALL[r.random_range(0..InitKind::ALL.len())],
        activation: ACTIVATIONS[r.random_range(0..ACTIVATIONS.len())],
        train_fraction: TRAIN_FRACTIONS[r.random_range(0..TRAIN_FRACTIONS.len())],
        seed: rng::derive_seed(sweep_seed, &[rng::tag::MODEL_SEED, k]),
    };
    assert!(hp.validate().is_ok(), "sampled hyperparameters out of range: {hp:?}");
    hp
}
