//! Small convolutional and fully-connected networks: architecture, weights,
//! initialization, forward/backward passes and optimizers.

mod init;
mod net;
mod optim;
mod params;
mod scalar;
mod spec;

pub use init::{init_params, InitKind, Initializer};
pub use net::{argmax, permute_units, Net, Targets, Workspace};
pub(crate) use net::sigmoid;
pub use optim::{
    OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, RMSPROP_DECAY, RMSPROP_EPSILON,
};
pub use params::{LayerLayout, Layout, ParameterSet};
pub use scalar::Scalar;
pub use spec::{param_count, Activation, LayerKind, LayerPlan, LayerSpec, NetworkSpec, Shape3, MAX_DROPOUT};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Logits for a batch of inputs (inference mode).
pub fn forward<T: Scalar>(spec: &NetworkSpec, params: &ParameterSet<T>, batch: &[T]) -> Result<Vec<T>> {
    Net::new(spec)?.forward(params, batch)
}

/// Mean softmax cross-entropy plus `l2_coeff * sum(w^2)` and its gradient.
/// Dropout is active only when `dropout_seed` is given.
pub fn loss_and_grads<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParameterSet<T>,
    batch: &[T],
    labels: &[u8],
    l2_coeff: f64,
    dropout_seed: Option<u64>,
) -> Result<(f64, ParameterSet<T>)> {
    Net::new(spec)?.loss_and_grads(params, batch, Targets::Classes(labels), l2_coeff, dropout_seed)
}

/// Fraction of examples whose argmax logit equals the label.
pub fn accuracy(spec: &NetworkSpec, params: &ParameterSet<f32>, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::validation("accuracy of an empty dataset"));
    }
    let (_, acc) = Net::new(spec)?.evaluate(params, dataset.images(), dataset.labels())?;
    Ok(acc)
}
