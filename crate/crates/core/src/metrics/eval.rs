use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scores::{kendall_tau, mad, mse, r2_score};
use crate::error::{Error, Result};
use crate::estimators::EstimatorModel;
use crate::features::FeatureTable;
use crate::zoo::canonical_json;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Holdout metrics of one estimator on one feature table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub mse: f64,
    pub mad: f64,
    pub r2: f64,
    pub kendall_tau: f64,
    pub n: usize,
    /// `(true, predicted)` per row, in table order.
    pub scatter: Vec<(f64, f64)>,
    /// Where the numbers came from: estimator, feature kind, dataset, and anything the caller adds.
    pub provenance: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn from_predictions(truth: &[f64], pred: &[f64]) -> Result<Self> {
        Ok(EvalReport {
            format_version: REPORT_FORMAT_VERSION,
            mse: mse(truth, pred)?,
            mad: mad(truth, pred)?,
            r2: r2_score(truth, pred)?,
            kendall_tau: kendall_tau(truth, pred)?,
            n: truth.len(),
            scatter: truth.iter().copied().zip(pred.iter().copied()).collect(),
            provenance: BTreeMap::new(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        canonical_json(self)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("true,predicted\n");
        for (t, p) in &self.scatter {
            let _ = writeln!(out, "{t:e},{p:e}");
        }
        out
    }

    pub fn write_scatter_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.scatter_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Score `model` on `table`; the table's features must match the model's.
pub fn evaluate(model: &EstimatorModel, table: &FeatureTable) -> Result<EvalReport> {
    let pred = model.predict_table(table)?;
    let mut report = EvalReport::from_predictions(&table.targets, &pred)?;
    report.provenance.insert("estimator".into(), model.kind.to_string());
    report.provenance.insert("feature_kind".into(), model.feature_kind.to_string());
    if let Some(d) = table.meta("dataset") {
        report.provenance.insert("dataset".into(), d.to_string());
    }
    Ok(report)
}

/// Kendall's tau of every model on every table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub format_version: u32,
    /// `tau[i][j]`: model `i` scored on table `j`.
    pub tau: Vec<Vec<f64>>,
    pub r2: Vec<Vec<f64>>,
    pub models: Vec<String>,
    pub tables: Vec<String>,
}

/// Cross-collection transfer: entry `(i, j)` evaluates model `i` on table `j`.
///
/// The diagonal uses exactly the code path of [`evaluate`].
pub fn transfer_matrix(models: &[EstimatorModel], tables: &[FeatureTable]) -> Result<TransferMatrix> {
    if models.is_empty() || tables.is_empty() {
        return Err(Error::validation("transfer needs at least one model and one table"));
    }
    let kind = &models[0].feature_kind;
    if let Some(m) = models.iter().find(|m| &m.feature_kind != kind) {
        return Err(Error::validation(format!(
            "models use different feature kinds ({kind} vs {})",
            m.feature_kind
        )));
    }
    let mut tau = Vec::with_capacity(models.len());
    let mut r2 = Vec::with_capacity(models.len());
    for m in models {
        let reports = tables.iter().map(|t| evaluate(m, t)).collect::<Result<Vec<_>>>()?;
        tau.push(reports.iter().map(|r| r.kendall_tau).collect());
        r2.push(reports.iter().map(|r| r.r2).collect());
    }
    Ok(TransferMatrix {
        format_version: REPORT_FORMAT_VERSION,
        tau,
        r2,
        models: models.iter().map(|m| m.kind.to_string()).collect(),
        tables: tables.iter().map(|t| t.meta("dataset").unwrap_or("").to_string()).collect(),
    })
}
