use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, BinnedTable, GrowConfig, Tree};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_FOREST_TREES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub num_trees: usize,
    /// Draw each tree's rows with replacement; otherwise every tree sees every row.
    pub bootstrap: bool,
    pub max_bin: usize,
    pub seed: u64,
}

impl ForestConfig {
    pub fn new(num_trees: usize, seed: u64) -> Self {
        ForestConfig {
            num_trees,
            bootstrap: true,
            max_bin: 255,
            seed,
        }
    }
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig::new(DEFAULT_FOREST_TREES, 0)
    }
}

/// Fully grown variance-reduction trees; the prediction is their mean.
pub fn fit_forest_raw(values: &[f64], n_features: usize, targets: &[f64], cfg: &ForestConfig) -> Result<Vec<Tree>> {
    let n = targets.len();
    if cfg.num_trees == 0 {
        return Err(Error::validation("forest needs at least one tree"));
    }
    if n == 0 || values.len() != n * n_features {
        return Err(Error::validation("forest needs a non-empty table"));
    }
    let binned = BinnedTable::new(values, n_features, cfg.max_bin)?;
    // With zero predictions the gradient is minus the target, so leaves hold target means.
    let grad: Vec<f64> = targets.iter().map(|t| -t).collect();
    let grow = GrowConfig {
        num_leaves: usize::MAX,
        max_depth: usize::MAX,
        min_child_rows: 1,
        reg_lambda: 0.0,
        reg_alpha: 0.0,
        shrinkage: 1.0,
    };
    let features: Vec<usize> = (0..n_features).collect();
    let trees = (0..cfg.num_trees as u64)
        .map(|t| {
            let rows: Vec<u32> = if cfg.bootstrap {
                let mut r = rng::stream(cfg.seed, &[rng::tag::TREE_ROWS, t]);
                let mut rows: Vec<u32> = (0..n).map(|_| r.random_range(0..n as u32)).collect();
                rows.sort_unstable();
                rows
            } else {
                (0..n as u32).collect()
            };
            grow_tree(&binned, &grad, rows, &features, &grow)
        })
        .collect();
    Ok(trees)
}
