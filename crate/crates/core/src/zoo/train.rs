use rand::seq::SliceRandom;

use super::hyper::HyperParams;
use super::record::{Metrics, Status};
use crate::data::{subsample, Dataset};
use crate::engine::{init_params, Initializer, Net, NetworkSpec, OptimizerState, ParameterSet, Targets};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_BATCH_SIZE: usize = 128;

/// Result of training one network.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub status: Status,
    pub metrics: Metrics,
    pub epochs_run: usize,
    /// The network the hyperparameters describe (base spec with hidden activation and dropout filled in).
    pub spec: NetworkSpec,
    /// Final weights; `None` when training diverged.
    pub params: Option<ParameterSet<f32>>,
}

/// Train one network for exactly `epochs` epochs and measure it.
///
/// A non-finite loss, gradient, or update at any step ends training with
/// [`Status::DiscardedInstability`]; that is an outcome, not an error.
pub fn train_one(
    base: &NetworkSpec,
    hp: &HyperParams,
    train: &Dataset,
    test: &Dataset,
    epochs: usize,
    batch_size: usize,
) -> Result<TrainOutcome> {
    if epochs == 0 {
        return Err(Error::validation("epochs must be at least 1"));
    }
    if batch_size == 0 {
        return Err(Error::validation("batch size must be at least 1"));
    }
    hp.validate()?;
    let spec = base.with_hidden(hp.activation, hp.dropout_rate);
    let net = Net::new(&spec)?;
    if train.pixels_per_image() != net.input_len() || test.pixels_per_image() != net.input_len() {
        return Err(Error::validation(format!(
            "images have {} pixels but the network expects {}",
            train.pixels_per_image(),
            net.input_len()
        )));
    }
    let train = subsample(train, hp.train_fraction, hp.seed)?;
    let init = Initializer {
        kind: hp.init_type,
        variance: hp.init_variance,
    };
    let mut params = init_params(&spec, init, hp.seed)?;
    let mut grads = ParameterSet::zeros(params.layout().clone());
    let mut opt = OptimizerState::new(hp.optimizer, hp.learning_rate, params.len())?;
    let mut ws = net.workspace();
    let mut shuffle = rng::stream(hp.seed, &[rng::tag::SHUFFLE]);
    let mut dropout = rng::stream(hp.seed, &[rng::tag::DROPOUT]);
    let use_dropout = hp.dropout_rate > 0.0;

    let d = net.input_len();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut xb: Vec<f32> = Vec::with_capacity(batch_size * d);
    let mut yb: Vec<u8> = Vec::with_capacity(batch_size);
    let discarded = |epochs_run| TrainOutcome {
        status: Status::DiscardedInstability,
        metrics: Metrics::default(),
        epochs_run,
        spec: spec.clone(),
        params: None,
    };

    for epoch in 0..epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(batch_size) {
            xb.clear();
            yb.clear();
            for &i in chunk {
                xb.extend_from_slice(train.image(i));
                yb.push(train.labels()[i]);
            }
            let step = net
                .loss_and_grads_into(
                    &params,
                    &xb,
                    Targets::Classes(&yb),
                    hp.l2_coeff,
                    use_dropout.then_some(&mut dropout),
                    &mut ws,
                    &mut grads,
                )
                .and_then(|_| opt.step(&mut params, &grads));
            match step {
                Ok(()) => {}
                Err(Error::Unstable(_)) => return Ok(discarded(epoch)),
                Err(e) => return Err(e),
            }
        }
    }

    let (train_loss, train_acc) = net.evaluate(&params, train.images(), train.labels())?;
    let (test_loss, test_acc) = net.evaluate(&params, test.images(), test.labels())?;
    if !(train_loss.is_finite() && test_loss.is_finite()) {
        return Ok(discarded(epochs));
    }
    Ok(TrainOutcome {
        status: Status::Ok,
        metrics: Metrics {
            train_accuracy: Some(train_acc),
            test_accuracy: Some(test_acc),
            train_loss: Some(train_loss),
            test_loss: Some(test_loss),
        },
        epochs_run: epochs,
        spec,
        params: Some(params),
    })
}
