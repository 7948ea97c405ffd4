use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{ForestConfig, DEFAULT_FOREST_TREES};
use super::gbm::GbmConfig;
use super::model::{fit, EstimatorConfig, EstimatorKind, EstimatorModel};
use super::nn::NnConfig;
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::metrics::{mse, r2_score};
use crate::rng;
use crate::zoo::canonical_json;

/// Draws per requested configuration before a search gives up looking for new ones.
const MAX_DRAWS_PER_CONFIG: usize = 100;

/// One draw from the search space of `kind` for `dim` input features.
pub fn sample_config<R: Rng>(kind: EstimatorKind, r: &mut R, dim: usize, fit_seed: u64) -> EstimatorConfig {
    match kind {
        EstimatorKind::Gbm => EstimatorConfig::Gbm(GbmConfig::sample(r, dim, fit_seed)),
        EstimatorKind::LogitLinear => EstimatorConfig::LogitLinear(NnConfig::sample_linear(r, fit_seed)),
        EstimatorKind::Dnn => EstimatorConfig::Dnn(NnConfig::sample_dnn(r, fit_seed)),
        // The forest has a fixed configuration; every draw is the same.
        EstimatorKind::RandomForest => {
            EstimatorConfig::RandomForest(ForestConfig::new(DEFAULT_FOREST_TREES, fit_seed))
        }
    }
}

/// `budget` distinct configurations of `kind`, in draw order.
pub fn sample_configs(kind: EstimatorKind, budget: usize, dim: usize, search_seed: u64) -> Result<Vec<EstimatorConfig>> {
    let mut r = rng::stream(search_seed, &[rng::tag::SEARCH]);
    let fit_seed = rng::derive_seed(search_seed, &[rng::tag::FIT]);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..budget.saturating_mul(MAX_DRAWS_PER_CONFIG) {
        if out.len() == budget {
            break;
        }
        let c = sample_config(kind, &mut r, dim, fit_seed);
        if seen.insert(canonical_json(&c)?) {
            out.push(c);
        }
    }
    Ok(out)
}

/// Row indices of each fold: a seeded shuffle cut into `folds` near-equal parts.
pub fn fold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(Error::validation(format!("cannot cut {n} rows into {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::tag::FOLDS]));
    let mut out = Vec::with_capacity(folds);
    for f in 0..folds {
        let lo = f * n / folds;
        let hi = (f + 1) * n / folds;
        let mut fold = order[lo..hi].to_vec();
        fold.sort_unstable();
        out.push(fold);
    }
    Ok(out)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

/// Cross-validation scores of one configuration. Standard deviations divide by the fold count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub fold_mse: Vec<f64>,
    /// `None` where a held-out fold had constant targets.
    pub fold_r2: Vec<Option<f64>>,
    pub mean_mse: f64,
    pub std_mse: f64,
    pub mean_r2: Option<f64>,
    pub std_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigOutcome {
    pub index: usize,
    pub config: EstimatorConfig,
    pub score: Option<CvScore>,
    /// Why the configuration could not be scored.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub estimator: EstimatorKind,
    pub budget: usize,
    pub folds: usize,
    pub search_seed: u64,
    pub best_index: usize,
    pub best: ConfigOutcome,
    pub evaluated: Vec<ConfigOutcome>,
}

/// K-fold cross-validation of one configuration.
pub fn cross_validate(table: &FeatureTable, config: &EstimatorConfig, folds: &[Vec<usize>]) -> Result<CvScore> {
    let n = table.n_rows();
    let mut fold_mse = Vec::with_capacity(folds.len());
    let mut fold_r2 = Vec::with_capacity(folds.len());
    for held in folds {
        let mut is_held = vec![false; n];
        held.iter().for_each(|&i| is_held[i] = true);
        let train: Vec<usize> = (0..n).filter(|&i| !is_held[i]).collect();
        let model = fit(&table.select(&train), config)?;
        let test = table.select(held);
        let pred = model.predict_table(&test)?;
        fold_mse.push(mse(&test.targets, &pred)?);
        fold_r2.push(match r2_score(&test.targets, &pred) {
            Ok(v) => Some(v),
            Err(Error::UndefinedScore(_)) => None,
            Err(e) => return Err(e),
        });
    }
    let (mean_mse, std_mse) = mean_std(&fold_mse);
    let r2: Option<Vec<f64>> = fold_r2.iter().copied().collect();
    let (mean_r2, std_r2) = match r2 {
        Some(v) => {
            let (m, s) = mean_std(&v);
            (Some(m), Some(s))
        }
        None => (None, None),
    };
    Ok(CvScore {
        fold_mse,
        fold_r2,
        mean_mse,
        std_mse,
        mean_r2,
        std_r2,
    })
}

/// Random search over `budget` distinct configurations with `folds`-fold
/// cross-validation, then a refit of the best one on the whole table.
///
/// The winner has the lowest mean held-out MSE; ties go to the earlier draw.
/// Configurations whose training diverges are logged and skipped.
pub fn random_search(
    table: &FeatureTable,
    kind: EstimatorKind,
    budget: usize,
    folds: usize,
    search_seed: u64,
) -> Result<(EstimatorModel, CvReport)> {
    if budget == 0 {
        return Err(Error::validation("search budget must be at least 1"));
    }
    let configs = sample_configs(kind, budget, table.n_features(), search_seed)?;
    let fold_rows = fold_indices(table.n_rows(), folds, search_seed)?;
    let evaluated: Vec<ConfigOutcome> = configs
        .into_par_iter()
        .enumerate()
        .map(|(index, config)| match cross_validate(table, &config, &fold_rows) {
            Ok(score) => Ok(ConfigOutcome {
                index,
                config,
                score: Some(score),
                failure: None,
            }),
            Err(e @ Error::Unstable(_)) => Ok(ConfigOutcome {
                index,
                config,
                score: None,
                failure: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let mut best: Option<&ConfigOutcome> = None;
    for o in &evaluated {
        if let Some(s) = &o.score {
            if best.is_none_or(|b| s.mean_mse < b.score.as_ref().unwrap().mean_mse) {
                best = Some(o);
            }
        }
    }
    let Some(best) = best.cloned() else {
        let log: Vec<String> = evaluated
            .iter()
            .map(|o| format!("config {}: {}", o.index, o.failure.as_deref().unwrap_or("?")))
            .collect();
        return Err(Error::Unstable(format!("every configuration failed: {}", log.join("; "))));
    };
    let model = fit(table, &best.config)?;
    let report = CvReport {
        estimator: kind,
        budget,
        folds,
        search_seed,
        best_index: best.index,
        best,
        evaluated,
    };
    Ok((model, report))
}
