use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, BinnedTable, GrowConfig, Tree};
use crate::error::{Error, Result};
use crate::rng;

pub const MAX_BINS: [usize; 3] = [63, 127, 255];
pub const SUBSAMPLES: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
/// Inputs at least this wide count as high-dimensional for column subsampling.
pub const HIGH_DIM: usize = 1000;
pub const DEFAULT_NUM_TREES: usize = 500;
pub const NUM_TREES_RANGE: (usize, usize) = (50, 500);
/// LightGBM's default minimum number of rows per leaf; not part of the search space.
pub const DEFAULT_MIN_CHILD_SAMPLES: usize = 20;

fn default_min_child_samples() -> usize {
    DEFAULT_MIN_CHILD_SAMPLES
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmConfig {
    pub num_trees: usize,
    pub num_leaves: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub max_bin: usize,
    /// Smallest number of rows in a child (unit hessians make weight and count agree).
    pub min_child_weight: usize,
    /// Also the smallest number of rows in a child; the stricter of the two applies.
    #[serde(default = "default_min_child_samples")]
    pub min_child_samples: usize,
    pub reg_lambda: f64,
    pub reg_alpha: f64,
    /// Fraction of rows drawn, without replacement, for each tree.
    pub subsample: f64,
    /// Trees between row resamples; always 1.
    pub subsample_freq: usize,
    pub colsample_bytree: f64,
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            num_trees: DEFAULT_NUM_TREES,
            num_leaves: 31,
            max_depth: 8,
            learning_rate: 0.05,
            max_bin: 255,
            min_child_weight: 1,
            min_child_samples: DEFAULT_MIN_CHILD_SAMPLES,
            reg_lambda: 1.0,
            reg_alpha: 0.0,
            subsample: 1.0,
            subsample_freq: 1,
            colsample_bytree: 1.0,
            seed: 0,
        }
    }
}

impl GbmConfig {
    /// One draw from the search space; `dim` picks the column-subsampling range.
    pub fn sample<R: Rng>(r: &mut R, dim: usize, seed: u64) -> Self {
        let colsample_bytree = if dim >= HIGH_DIM {
            r.random_range(1e-2f64.ln()..=1e-1f64.ln()).exp().clamp(1e-2, 1e-1)
        } else {
            r.random_range(0.7..=1.0)
        };
        GbmConfig {
            num_trees: r.random_range(NUM_TREES_RANGE.0..=NUM_TREES_RANGE.1),
            num_leaves: r.random_range(20..=10_000),
            max_depth: r.random_range(5..=15),
            learning_rate: r.random_range(1e-2f64.ln()..=1e-1f64.ln()).exp().clamp(1e-2, 1e-1),
            max_bin: MAX_BINS[r.random_range(0..MAX_BINS.len())],
            min_child_weight: r.random_range(1..=5),
            min_child_samples: DEFAULT_MIN_CHILD_SAMPLES,
            reg_lambda: r.random_range(1e-3..=100.0),
            reg_alpha: r.random_range(1e-6..=5.0),
            subsample: SUBSAMPLES[r.random_range(0..SUBSAMPLES.len())],
            subsample_freq: 1,
            colsample_bytree,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::validation(format!("gbm config: {m}")));
        if self.num_trees == 0 || self.num_leaves < 2 || self.max_depth == 0 {
            return bad("num_trees, num_leaves and max_depth must be positive (num_leaves >= 2)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.max_bin < 2 || self.min_child_weight == 0 || self.min_child_samples == 0 {
            return bad("max_bin >= 2, min_child_weight >= 1 and min_child_samples >= 1 required");
        }
        if !(self.reg_lambda >= 0.0 && self.reg_alpha >= 0.0) {
            return bad("regularization must be non-negative");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0 && self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0)
        {
            return bad("subsample and colsample_bytree must lie in (0, 1]");
        }
        if self.subsample_freq != 1 {
            return bad("subsample_freq must be 1");
        }
        Ok(())
    }
}

/// Fitted boosted ensemble: `init + sum of trees`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmFit {
    pub init: f64,
    pub trees: Vec<Tree>,
}

impl GbmFit {
    /// Unclamped ensemble output.
    pub fn raw(&self, row: &[f64]) -> f64 {
        self.init + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }
}

/// Mean computed relative to the first value, so a constant column averages to itself exactly.
pub(crate) fn exact_mean(v: &[f64]) -> f64 {
    let first = v[0];
    first + v.iter().map(|x| x - first).sum::<f64>() / v.len() as f64
}

pub(crate) fn sample_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n)
}

/// Boost squared-error trees on a row-major table.
///
/// Also returns the training MSE of the raw ensemble after each tree.
pub fn fit_gbm_raw(values: &[f64], n_features: usize, targets: &[f64], cfg: &GbmConfig) -> Result<(GbmFit, Vec<f64>)> {
    cfg.validate()?;
    let n = targets.len();
    if n == 0 || values.len() != n * n_features {
        return Err(Error::validation("gbm needs a non-empty table"));
    }
    let binned = BinnedTable::new(values, n_features, cfg.max_bin)?;
    let init = exact_mean(targets);
    let mut pred = vec![init; n];
    let mut grad = vec![0.0; n];
    let grow = GrowConfig {
        num_leaves: cfg.num_leaves,
        max_depth: cfg.max_depth,
        min_child_rows: cfg.min_child_weight.max(cfg.min_child_samples),
        reg_lambda: cfg.reg_lambda,
        reg_alpha: cfg.reg_alpha,
        shrinkage: cfg.learning_rate,
    };
    let mut row_rng = rng::stream(cfg.seed, &[rng::tag::TREE_ROWS]);
    let mut col_rng = rng::stream(cfg.seed, &[rng::tag::TREE_COLS]);
    let n_rows = sample_count(cfg.subsample, n);
    let n_cols = sample_count(cfg.colsample_bytree, n_features);
    let mut trees = Vec::with_capacity(cfg.num_trees);
    let mut history = Vec::with_capacity(cfg.num_trees);
    for _ in 0..cfg.num_trees {
        for i in 0..n {
            grad[i] = pred[i] - targets[i];
        }
        let mut rows: Vec<u32> = if n_rows == n {
            (0..n as u32).collect()
        } else {
            index::sample(&mut row_rng, n, n_rows).into_iter().map(|i| i as u32).collect()
        };
        rows.sort_unstable();
        let mut cols: Vec<usize> = if n_cols == n_features {
            (0..n_features).collect()
        } else {
            index::sample(&mut col_rng, n_features, n_cols).into_vec()
        };
        cols.sort_unstable();
        let tree = grow_tree(&binned, &grad, rows, &cols, &grow);
        let mut sse = 0.0;
        for i in 0..n {
            pred[i] += tree.predict(&values[i * n_features..(i + 1) * n_features]);
            sse += (pred[i] - targets[i]).powi(2);
        }
        history.push(sse / n as f64);
        trees.push(tree);
    }
    Ok((GbmFit { init, trees }, history))
}
