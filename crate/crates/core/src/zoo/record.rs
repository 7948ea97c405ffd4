use serde::{Deserialize, Serialize};

use super::hyper::HyperParams;
use crate::engine::NetworkSpec;
use crate::error::{Error, Result};

/// Version of the zoo directory layout (zoo.json, manifest, checkpoints).
pub const ZOO_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    DiscardedInstability,
}

/// Final-epoch metrics. `None` for networks that diverged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub train_loss: Option<f64>,
    pub test_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZooRecord {
    pub model_id: String,
    /// Position in the sweep; `sample_hyperparams(sweep_seed, index)` reproduces the configuration.
    pub index: u64,
    /// Relative to the zoo directory. Absent for discarded networks.
    pub checkpoint_path: Option<String>,
    pub hyperparams: HyperParams,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub epochs_run: usize,
    pub status: Status,
}

impl ZooRecord {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    pub fn test_accuracy(&self) -> Option<f64> {
        self.metrics.test_accuracy
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.metrics;
        let all = [m.train_accuracy, m.test_accuracy, m.train_loss, m.test_loss];
        if self.is_ok() {
            if all.iter().any(|v| !v.is_some_and(f64::is_finite)) {
                return Err(Error::validation(format!("{}: ok record with missing or non-finite metrics", self.model_id)));
            }
            if self.checkpoint_path.is_none() {
                return Err(Error::validation(format!("{}: ok record without checkpoint", self.model_id)));
            }
        }
        for acc in [m.train_accuracy, m.test_accuracy].into_iter().flatten() {
            if !(0.0..=1.0).contains(&acc) {
                return Err(Error::validation(format!("{}: accuracy {acc} outside [0, 1]", self.model_id)));
            }
        }
        self.hyperparams.validate()
    }
}

pub fn model_id(index: u64) -> String {
    format!("model_{index:06}")
}

/// How a zoo was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub count: u64,
    pub sweep_seed: u64,
    pub format_version: u32,
}

/// Contents of `zoo.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZooMeta {
    pub dataset: String,
    pub num_classes: usize,
    /// Base architecture; each network substitutes its own hidden activation and dropout.
    pub architecture: NetworkSpec,
    pub generation: GenerationConfig,
}
