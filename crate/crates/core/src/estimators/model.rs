use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::forest::{fit_forest_raw, ForestConfig};
use super::gbm::{fit_gbm_raw, GbmConfig, GbmFit};
use super::nn::{fit_nn_raw, NnConfig, NnFit};
use super::tree::{Node, Tree};
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureTable};
use crate::zoo::canonical_json;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    LogitLinear,
    Gbm,
    RandomForest,
    Dnn,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::LogitLinear,
        EstimatorKind::Gbm,
        EstimatorKind::RandomForest,
        EstimatorKind::Dnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::LogitLinear => "logit_linear",
            EstimatorKind::Gbm => "gbm",
            EstimatorKind::RandomForest => "random_forest",
            EstimatorKind::Dnn => "dnn",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown estimator {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum EstimatorConfig {
    LogitLinear(NnConfig),
    Gbm(GbmConfig),
    RandomForest(ForestConfig),
    Dnn(NnConfig),
}

impl EstimatorConfig {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            EstimatorConfig::LogitLinear(_) => EstimatorKind::LogitLinear,
            EstimatorConfig::Gbm(_) => EstimatorKind::Gbm,
            EstimatorConfig::RandomForest(_) => EstimatorKind::RandomForest,
            EstimatorConfig::Dnn(_) => EstimatorKind::Dnn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fitted {
    Gbm(GbmFit),
    RandomForest { trees: Vec<Tree> },
    Network(NnFit),
}

/// A fitted accuracy predictor together with the features it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorModel {
    pub format_version: u32,
    pub kind: EstimatorKind,
    pub config: EstimatorConfig,
    pub feature_kind: FeatureKind,
    pub feature_names: Vec<String>,
    pub fitted: Fitted,
    /// Free-form notes on how the model was produced; ignored by prediction.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, String>,
}

fn check_targets(targets: &[f64]) -> Result<()> {
    if let Some(t) = targets.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::validation(format!("target {t} outside [0, 1]")));
    }
    Ok(())
}

/// Fit any estimator on a feature table.
pub fn fit(table: &FeatureTable, config: &EstimatorConfig) -> Result<EstimatorModel> {
    check_targets(&table.targets)?;
    let d = table.n_features();
    let (x, y) = (table.values(), &table.targets[..]);
    let fitted = match config {
        EstimatorConfig::Gbm(c) => Fitted::Gbm(fit_gbm_raw(x, d, y, c)?.0),
        EstimatorConfig::RandomForest(c) => Fitted::RandomForest {
            trees: fit_forest_raw(x, d, y, c)?,
        },
        EstimatorConfig::LogitLinear(c) => {
            if c.hidden_layers != 0 {
                return Err(Error::validation("logit-linear model has no hidden layers"));
            }
            Fitted::Network(fit_nn_raw(x, d, y, c)?)
        }
        EstimatorConfig::Dnn(c) => Fitted::Network(fit_nn_raw(x, d, y, c)?),
    };
    Ok(EstimatorModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: config.kind(),
        config: config.clone(),
        feature_kind: table.kind.clone(),
        feature_names: table.names.clone(),
        fitted,
        provenance: BTreeMap::new(),
    })
}

pub fn fit_gbm(table: &FeatureTable, config: &GbmConfig) -> Result<EstimatorModel> {
    fit(table, &EstimatorConfig::Gbm(config.clone()))
}

pub fn fit_random_forest(table: &FeatureTable, num_trees: usize, seed: u64) -> Result<EstimatorModel> {
    fit(table, &EstimatorConfig::RandomForest(ForestConfig::new(num_trees, seed)))
}

pub fn fit_logit_linear(table: &FeatureTable, config: &NnConfig) -> Result<EstimatorModel> {
    fit(table, &EstimatorConfig::LogitLinear(config.clone()))
}

pub fn fit_dnn(table: &FeatureTable, config: &NnConfig) -> Result<EstimatorModel> {
    fit(table, &EstimatorConfig::Dnn(config.clone()))
}

impl EstimatorModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Predictions for row-major values already known to match the model's features.
    pub fn predict_rows(&self, values: &[f64]) -> Result<Vec<f64>> {
        let d = self.n_features();
        if !values.len().is_multiple_of(d) {
            return Err(Error::validation(format!(
                "{} values do not form rows of {d} features",
                values.len()
            )));
        }
        let rows = values.chunks_exact(d);
        Ok(match &self.fitted {
            Fitted::Gbm(g) => rows.map(|r| g.raw(r).clamp(0.0, 1.0)).collect(),
            Fitted::RandomForest { trees } => rows
                .map(|r| {
                    let s: f64 = trees.iter().map(|t| t.predict(r)).sum();
                    (s / trees.len() as f64).clamp(0.0, 1.0)
                })
                .collect(),
            Fitted::Network(n) => n.predict_rows(values)?,
        })
    }

    /// Predict one feature vector; `names` must equal the training feature names.
    pub fn predict(&self, names: &[String], values: &[f64]) -> Result<f64> {
        self.check_names(names)?;
        if values.len() != self.n_features() {
            return Err(Error::validation(format!(
                "model expects {} values, got {}",
                self.n_features(),
                values.len()
            )));
        }
        Ok(self.predict_rows(values)?[0])
    }

    pub fn check_names(&self, names: &[String]) -> Result<()> {
        if names.len() != self.n_features() {
            return Err(Error::validation(format!(
                "model expects {} features, got {}",
                self.n_features(),
                names.len()
            )));
        }
        if let Some((a, b)) = self.feature_names.iter().zip(names).find(|(a, b)| a != b) {
            return Err(Error::validation(format!("feature name mismatch: model has {a}, input has {b}")));
        }
        Ok(())
    }

    pub fn predict_table(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        self.check_names(&table.names)?;
        self.predict_rows(table.values())
    }

    pub fn to_json(&self) -> Result<String> {
        canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::parse(format!("model file: {e}")))?;
        let version = value.get("format_version").and_then(|v| v.as_u64());
        if version != Some(MODEL_FORMAT_VERSION as u64) {
            return Err(Error::Version(format!(
                "model format {version:?} (supported: {MODEL_FORMAT_VERSION})"
            )));
        }
        let model: EstimatorModel =
            serde_json::from_value(value).map_err(|e| Error::parse(format!("model file: {e}")))?;
        if let Fitted::Gbm(GbmFit { trees, .. }) | Fitted::RandomForest { trees } = &model.fitted {
            for t in trees {
                t.validate(model.n_features())?;
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn trees(&self) -> Option<&[Tree]> {
        match &self.fitted {
            Fitted::Gbm(g) => Some(&g.trees),
            Fitted::RandomForest { trees } => Some(trees),
            Fitted::Network(_) => None,
        }
    }
}

/// How often each feature was chosen for a split, over all trees.
pub fn feature_importance(model: &EstimatorModel) -> Result<Vec<(String, usize)>> {
    let trees = model
        .trees()
        .ok_or_else(|| Error::validation(format!("{} model has no trees", model.kind)))?;
    let mut counts = vec![0usize; model.n_features()];
    for t in trees {
        for n in &t.nodes {
            if let Node::Split { feature, .. } = n {
                counts[*feature] += 1;
            }
        }
    }
    Ok(model.feature_names.iter().cloned().zip(counts).collect())
}
