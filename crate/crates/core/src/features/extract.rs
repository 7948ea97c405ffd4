use serde::{Deserialize, Serialize};

use super::kind::{FeatureKind, LayerRef};
use super::stats::{stat_block, STAT_NAMES};
use crate::engine::ParameterSet;
use crate::error::{Error, Result};
use crate::zoo::{HyperParams, ACTIVATIONS};

/// Named values computed from one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    fn new(kind: FeatureKind) -> Self {
        FeatureVector {
            kind,
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    fn push(&mut self, name: String, value: f64) {
        self.names.push(name);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Names of the hyperparameter encoding, in order.
pub const HYPERPARAM_NAMES: [&str; 7] = [
    "hp.optimizer",
    "hp.learning_rate",
    "hp.l2_coeff",
    "hp.dropout_rate",
    "hp.init_type",
    "hp.activation",
    "hp.train_fraction",
];

/// Categorical fields become integer codes; reals are kept raw (no log transform).
pub fn encode_hyperparams(hp: &HyperParams) -> [f64; 7] {
    let activation = ACTIVATIONS.iter().position(|&a| a == hp.activation).unwrap_or(ACTIVATIONS.len());
    [
        hp.optimizer.code() as f64,
        hp.learning_rate,
        hp.l2_coeff,
        hp.dropout_rate,
        hp.init_type.code() as f64,
        activation as f64,
        hp.train_fraction,
    ]
}

fn push_flat(fv: &mut FeatureVector, params: &ParameterSet<f32>, layer: usize) {
    for (i, &v) in params.kernel(layer).iter().enumerate() {
        fv.push(format!("L{}.kernel.{i}", layer + 1), v as f64);
    }
    for (i, &v) in params.bias(layer).iter().enumerate() {
        fv.push(format!("L{}.bias.{i}", layer + 1), v as f64);
    }
}

fn push_stats(fv: &mut FeatureVector, label: &str, values: &[f32]) -> Result<()> {
    let block = stat_block(values)?;
    for (name, v) in STAT_NAMES.iter().zip(block.to_array()) {
        fv.push(format!("{label}.{name}"), v);
    }
    Ok(())
}

fn push_layer_stats(fv: &mut FeatureVector, params: &ParameterSet<f32>, layer: usize, label: &str) -> Result<()> {
    push_stats(fv, &format!("{label}.kernel"), params.kernel(layer))?;
    push_stats(fv, &format!("{label}.bias"), params.bias(layer))
}

fn norm(values: &[f32], p: u8) -> f64 {
    match p {
        1 => values.iter().map(|&v| (v as f64).abs()).sum(),
        _ => values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt(),
    }
}

fn range(values: &[f32]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v as f64), hi.max(v as f64)));
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Per layer, the kernel norm then the bias norm. `p = 2` is the Euclidean norm.
pub fn layer_norms(params: &ParameterSet<f32>, p: u8) -> Result<FeatureVector> {
    let kind = match p {
        1 => FeatureKind::NormsL1,
        2 => FeatureKind::NormsL2,
        _ => return Err(Error::validation(format!("norm order must be 1 or 2, got {p}"))),
    };
    let mut fv = FeatureVector::new(kind);
    for l in 0..params.num_layers() {
        fv.push(format!("L{}.kernel.l{p}", l + 1), norm(params.kernel(l), p));
        fv.push(format!("L{}.bias.l{p}", l + 1), norm(params.bias(l), p));
    }
    Ok(fv)
}

/// Compute the feature vector `kind` of a network.
pub fn extract(params: &ParameterSet<f32>, kind: &FeatureKind, hp: Option<&HyperParams>) -> Result<FeatureVector> {
    let hp = match (kind.needs_hyperparams(), hp) {
        (true, None) => return Err(Error::validation(format!("feature kind {kind} needs hyperparameters"))),
        (_, hp) => hp,
    };
    let layers = params.num_layers();
    let mut fv = FeatureVector::new(kind.clone());
    match kind {
        FeatureKind::FlatAll => (0..layers).for_each(|l| push_flat(&mut fv, params, l)),
        FeatureKind::FlatLayer(l) => push_flat(&mut fv, params, LayerRef::Index(*l).resolve(layers)?),
        FeatureKind::StatsGlobal => push_stats(&mut fv, "all", params.as_slice())?,
        FeatureKind::StatsPerLayer => {
            for l in 0..layers {
                push_layer_stats(&mut fv, params, l, &format!("L{}", l + 1))?;
            }
        }
        FeatureKind::StatsLayerSubset(set) => {
            for r in set {
                push_layer_stats(&mut fv, params, r.resolve(layers)?, &format!("L{r}"))?;
            }
        }
        FeatureKind::NormsL1 => return layer_norms(params, 1),
        FeatureKind::NormsL2 => return layer_norms(params, 2),
        FeatureKind::Hyperparams | FeatureKind::HyperparamsPlusFlat => {
            for (name, v) in HYPERPARAM_NAMES.iter().zip(encode_hyperparams(hp.unwrap())) {
                fv.push(name.to_string(), v);
            }
            if *kind == FeatureKind::HyperparamsPlusFlat {
                (0..layers).for_each(|l| push_flat(&mut fv, params, l));
            }
        }
        FeatureKind::HyperparamsLr => fv.push("hp.learning_rate".into(), hp.unwrap().learning_rate),
        FeatureKind::BiasRange => {
            for l in 0..layers {
                fv.push(format!("L{}.bias.range", l + 1), range(params.bias(l)));
            }
        }
    }
    Ok(fv)
}
