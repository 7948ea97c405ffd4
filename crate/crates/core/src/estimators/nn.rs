use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gbm::exact_mean;
use crate::engine::{
    init_params, sigmoid, Activation, InitKind, Initializer, Net, NetworkSpec, OptimizerKind, OptimizerState,
    ParameterSet, Targets,
};
use crate::error::{Error, Result};
use crate::rng;

pub const DNN_LAYERS: (usize, usize) = (3, 9);
pub const DNN_UNITS: (usize, usize) = (256, 511);
pub const DNN_MAX_DROPOUT: f64 = 0.2;
pub const NN_L2_RANGE: (f64, f64) = (1e-8, 1e-3);
pub const NN_LR_RANGE: (f64, f64) = (1e-3, 0.5);
pub const NN_INIT_VARIANCE_RANGE: (f64, f64) = (1e-3, 0.1);
pub const NN_BATCH_SIZES: [usize; 4] = [64, 128, 256, 512];
pub const NN_OPTIMIZERS: [OptimizerKind; 2] = [OptimizerKind::Adam, OptimizerKind::Sgd];
pub const DEFAULT_NN_EPOCHS: usize = 100;

/// Training settings of the fully-connected regressors. Zero hidden layers
/// gives the logit-linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnConfig {
    pub hidden_layers: usize,
    pub units: usize,
    pub dropout: f64,
    pub l2: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub init_type: InitKind,
    pub init_variance: f64,
    pub epochs: usize,
    pub seed: u64,
}

fn log_uniform<R: Rng>(r: &mut R, (lo, hi): (f64, f64)) -> f64 {
    r.random_range(lo.ln()..=hi.ln()).exp().clamp(lo, hi)
}

impl NnConfig {
    pub fn sample_dnn<R: Rng>(r: &mut R, seed: u64) -> Self {
        NnConfig {
            hidden_layers: r.random_range(DNN_LAYERS.0..=DNN_LAYERS.1),
            units: r.random_range(DNN_UNITS.0..=DNN_UNITS.1),
            dropout: r.random_range(0.0..=DNN_MAX_DROPOUT),
            ..Self::sample_linear(r, seed)
        }
    }

    pub fn sample_linear<R: Rng>(r: &mut R, seed: u64) -> Self {
        NnConfig {
            hidden_layers: 0,
            units: 0,
            dropout: 0.0,
            l2: log_uniform(r, NN_L2_RANGE),
            learning_rate: log_uniform(r, NN_LR_RANGE),
            optimizer: NN_OPTIMIZERS[r.random_range(0..NN_OPTIMIZERS.len())],
            batch_size: NN_BATCH_SIZES[r.random_range(0..NN_BATCH_SIZES.len())],
            init_type: InitKind::ALL[r.random_range(0..InitKind::ALL.len())],
            init_variance: log_uniform(r, NN_INIT_VARIANCE_RANGE),
            epochs: DEFAULT_NN_EPOCHS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::validation("nn config: epochs and batch size must be positive"));
        }
        if self.hidden_layers > 0 && self.units == 0 {
            return Err(Error::validation("nn config: hidden layers need units"));
        }
        if !(self.learning_rate > 0.0 && self.l2 >= 0.0 && self.init_variance > 0.0) {
            return Err(Error::validation("nn config: bad learning rate, l2 or init variance"));
        }
        Ok(())
    }

    pub fn network(&self, input_dim: usize) -> NetworkSpec {
        let hidden = vec![self.units; self.hidden_layers];
        NetworkSpec::mlp(input_dim, &hidden, 1, Activation::Relu, self.dropout)
    }
}

/// A fitted regressor: inputs are standardized with the stored column
/// statistics, then `sigmoid(net(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnFit {
    pub spec: NetworkSpec,
    pub weights: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn column_stats(values: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = Vec::with_capacity(d);
    let mut std = Vec::with_capacity(d);
    for f in 0..d {
        let col: Vec<f64> = values.iter().skip(f).step_by(d).copied().collect();
        let m = exact_mean(&col);
        let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / col.len() as f64;
        mean.push(m);
        // Constant columns are centred but not scaled.
        std.push(if var > 0.0 { var.sqrt() } else { 1.0 });
    }
    (mean, std)
}

fn standardize(row: &[f64], mean: &[f64], std: &[f64], out: &mut Vec<f64>) {
    out.extend(row.iter().zip(mean).zip(std).map(|((x, m), s)| (x - m) / s));
}

impl NnFit {
    pub fn net(&self) -> Result<(Net, ParameterSet<f64>)> {
        let params = ParameterSet::unflatten(crate::engine::Layout::for_spec(&self.spec)?, self.weights.clone())?;
        Ok((Net::new(&self.spec)?, params))
    }

    pub fn predict_rows(&self, values: &[f64]) -> Result<Vec<f64>> {
        let (net, params) = self.net()?;
        let mut x = Vec::with_capacity(values.len());
        for row in values.chunks_exact(self.mean.len()) {
            standardize(row, &self.mean, &self.std, &mut x);
        }
        Ok(net.forward(&params, &x)?.into_iter().map(sigmoid).collect())
    }
}

/// Train on a row-major table with mini-batches and squared error on the sigmoid output.
pub fn fit_nn_raw(values: &[f64], d: usize, targets: &[f64], cfg: &NnConfig) -> Result<NnFit> {
    cfg.validate()?;
    let n = targets.len();
    if n == 0 || values.len() != n * d {
        return Err(Error::validation("nn regressor needs a non-empty table"));
    }
    let (mean, std) = column_stats(values, d);
    let mut x = Vec::with_capacity(values.len());
    for row in values.chunks_exact(d) {
        standardize(row, &mean, &std, &mut x);
    }
    let spec = cfg.network(d);
    let net = Net::new(&spec)?;
    let init = Initializer {
        kind: cfg.init_type,
        variance: cfg.init_variance,
    };
    let mut params: ParameterSet<f64> = init_params(&spec, init, cfg.seed)?.cast();
    let mut grads = ParameterSet::zeros(params.layout().clone());
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, params.len())?;
    let mut ws = net.workspace();
    let mut shuffle = rng::stream(cfg.seed, &[rng::tag::SHUFFLE]);
    let mut dropout = rng::stream(cfg.seed, &[rng::tag::DROPOUT]);
    let mut order: Vec<usize> = (0..n).collect();
    let mut xb = Vec::new();
    let mut yb = Vec::new();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(cfg.batch_size) {
            xb.clear();
            yb.clear();
            for &i in chunk {
                xb.extend_from_slice(&x[i * d..(i + 1) * d]);
                yb.push(targets[i]);
            }
            net.loss_and_grads_into(
                &params,
                &xb,
                Targets::Regression(&yb),
                cfg.l2,
                (cfg.dropout > 0.0).then_some(&mut dropout),
                &mut ws,
                &mut grads,
            )?;
            opt.step(&mut params, &grads)?;
        }
    }
    Ok(NnFit {
        spec,
        weights: params.flatten(),
        mean,
        std,
    })
}
