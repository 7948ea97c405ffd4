//! Histogram regression trees shared by the boosted and random-forest estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
        /// Where a missing value would go. Tables never contain missing values.
        default_left: bool,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// `nodes[0]` is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn constant(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    default_left,
                } => {
                    let x = row[feature];
                    i = if x.is_nan() {
                        if default_left {
                            left
                        } else {
                            right
                        }
                    } else if x <= threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn num_splits(&self) -> usize {
        self.nodes.len() - self.num_leaves()
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }

    /// Structural checks: indices in range, every node reachable exactly once,
    /// features below `n_features`, finite thresholds and leaf values.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if i >= self.nodes.len() || seen[i] {
                return Err(Error::parse("tree nodes do not form a tree"));
            }
            seen[i] = true;
            match self.nodes[i] {
                Node::Leaf { value } if !value.is_finite() => return Err(Error::parse("non-finite leaf value")),
                Node::Leaf { .. } => {}
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if feature >= n_features || !threshold.is_finite() {
                        return Err(Error::parse("split on a bad feature or threshold"));
                    }
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::parse("tree has unreachable nodes"));
        }
        Ok(())
    }
}

/// Feature values quantized into at most `max_bin` bins per feature.
#[derive(Debug, Clone)]
pub struct BinnedTable {
    n_rows: usize,
    /// Column-major bin indices.
    bins: Vec<Vec<u16>>,
    /// `thresholds[f][b]` separates bin `b` from bin `b + 1`.
    thresholds: Vec<Vec<f64>>,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // Between adjacent floats the midpoint can round up to `b`, which would send `b` left.
    if m >= b {
        a
    } else {
        m
    }
}

/// Bin edges for one feature.
///
/// With at most `max_bin` distinct values every value gets its own bin.
/// Otherwise cuts are placed at equal-frequency positions, moved forward to
/// the next change of value so that equal values share a bin.
pub fn bin_thresholds(values: &[f64], max_bin: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= max_bin {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut cuts: Vec<usize> = Vec::with_capacity(max_bin);
    for b in 1..max_bin {
        let mut i = (b * n + max_bin / 2) / max_bin;
        while i < n && sorted[i] == sorted[i - 1] {
            i += 1;
        }
        if i < n && cuts.last() != Some(&i) && i > 0 {
            cuts.push(i);
        }
    }
    cuts.iter().map(|&i| midpoint(sorted[i - 1], sorted[i])).collect()
}

impl BinnedTable {
    /// Bin a row-major table of `n_features` columns.
    pub fn new(values: &[f64], n_features: usize, max_bin: usize) -> Result<Self> {
        if n_features == 0 || !values.len().is_multiple_of(n_features) {
            return Err(Error::validation("table shape does not divide into rows"));
        }
        if !(2..=u16::MAX as usize).contains(&max_bin) {
            return Err(Error::validation(format!("max_bin {max_bin} out of range")));
        }
        let n_rows = values.len() / n_features;
        let mut bins = Vec::with_capacity(n_features);
        let mut thresholds = Vec::with_capacity(n_features);
        for f in 0..n_features {
            let col: Vec<f64> = values.iter().skip(f).step_by(n_features).copied().collect();
            let t = bin_thresholds(&col, max_bin);
            bins.push(col.iter().map(|&x| t.partition_point(|&e| e < x) as u16).collect());
            thresholds.push(t);
        }
        Ok(BinnedTable {
            n_rows,
            bins,
            thresholds,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }

    pub fn thresholds(&self, feature: usize) -> &[f64] {
        &self.thresholds[feature]
    }
}

/// Settings for growing one tree.
#[derive(Debug, Clone)]
pub struct GrowConfig {
    pub num_leaves: usize,
    pub max_depth: usize,
    /// Smallest number of rows allowed in a child.
    pub min_child_rows: usize,
    pub reg_lambda: f64,
    pub reg_alpha: f64,
    /// Multiplies every leaf value.
    pub shrinkage: f64,
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

/// Objective reduction score of a node with gradient sum `g` over `n` rows.
pub fn node_score(g: f64, n: f64, lambda: f64, alpha: f64) -> f64 {
    let t = soft_threshold(g, alpha);
    t * t / (n + lambda)
}

/// Gain of splitting a node into (`gl`, `nl`) and the remainder.
pub fn split_gain(gl: f64, nl: f64, g: f64, n: f64, lambda: f64, alpha: f64) -> f64 {
    node_score(gl, nl, lambda, alpha) + node_score(g - gl, n - nl, lambda, alpha) - node_score(g, n, lambda, alpha)
}

/// Leaf value minimizing the regularized squared error, before shrinkage.
pub fn leaf_value(g: f64, n: f64, lambda: f64, alpha: f64) -> f64 {
    -soft_threshold(g, alpha) / (n + lambda)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub bin: usize,
    pub gain: f64,
}

struct Candidate {
    node: usize,
    depth: usize,
    rows: Vec<u32>,
    best: Option<SplitChoice>,
}

/// Best split of `rows`, scanning `features` in ascending order and bins left
/// to right; only a strictly larger gain replaces the incumbent, so ties go to
/// the lowest feature and then the lowest threshold.
pub fn best_split(
    table: &BinnedTable,
    grad: &[f64],
    rows: &[u32],
    features: &[usize],
    cfg: &GrowConfig,
) -> Option<SplitChoice> {
    let n = rows.len() as f64;
    let g: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
    let min = cfg.min_child_rows.max(1);
    if rows.len() < 2 * min {
        return None;
    }
    // Every split of a node with one shared gradient has zero gain; rounding could say otherwise.
    let g0 = grad[rows[0] as usize];
    if rows.iter().all(|&r| grad[r as usize] == g0) {
        return None;
    }
    let mut best: Option<SplitChoice> = None;
    let mut hist_g: Vec<f64> = Vec::new();
    let mut hist_n: Vec<usize> = Vec::new();
    for &f in features {
        let nb = table.thresholds[f].len() + 1;
        if nb < 2 {
            continue;
        }
        hist_g.clear();
        hist_g.resize(nb, 0.0);
        hist_n.clear();
        hist_n.resize(nb, 0);
        let col = &table.bins[f];
        for &r in rows {
            let b = col[r as usize] as usize;
            hist_g[b] += grad[r as usize];
            hist_n[b] += 1;
        }
        let (mut gl, mut nl) = (0.0, 0usize);
        for b in 0..nb - 1 {
            gl += hist_g[b];
            nl += hist_n[b];
            if nl < min {
                continue;
            }
            if rows.len() - nl < min {
                break;
            }
            if hist_n[b] == 0 && b > 0 {
                // Same partition as the previous bin; that lower threshold already competed.
                continue;
            }
            let gain = split_gain(gl, nl as f64, g, n, cfg.reg_lambda, cfg.reg_alpha);
            if gain > 0.0 && best.is_none_or(|s| gain > s.gain) {
                best = Some(SplitChoice { feature: f, bin: b, gain });
            }
        }
    }
    best
}

/// Grow one tree on the gradients `grad` (prediction minus target) of `rows`.
///
/// Growth is best-first: the leaf with the largest gain is split next (ties to
/// the earliest-created leaf) until `num_leaves` leaves exist or no leaf has a
/// positive-gain split within `max_depth`. `rows` may repeat indices.
pub fn grow_tree(table: &BinnedTable, grad: &[f64], rows: Vec<u32>, features: &[usize], cfg: &GrowConfig) -> Tree {
    if rows.is_empty() {
        return Tree::constant(0.0);
    }
    let leaf = |rows: &[u32]| {
        let g: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
        cfg.shrinkage * leaf_value(g, rows.len() as f64, cfg.reg_lambda, cfg.reg_alpha)
    };
    let mut tree = Tree {
        nodes: vec![Node::Leaf { value: leaf(&rows) }],
    };
    let splittable = |depth: usize| depth < cfg.max_depth;
    let mut open: Vec<Candidate> = Vec::new();
    let best = if splittable(0) {
        best_split(table, grad, &rows, features, cfg)
    } else {
        None
    };
    open.push(Candidate {
        node: 0,
        depth: 0,
        rows,
        best,
    });
    let mut leaves = 1;
    while leaves < cfg.num_leaves {
        let mut pick: Option<usize> = None;
        for (i, c) in open.iter().enumerate() {
            if let Some(s) = c.best {
                if pick.is_none_or(|p| s.gain > open[p].best.unwrap().gain) {
                    pick = Some(i);
                }
            }
        }
        let Some(i) = pick else { break };
        let c = open.remove(i);
        let split = c.best.unwrap();
        let col = &table.bins[split.feature];
        let (lrows, rrows): (Vec<u32>, Vec<u32>) = c.rows.iter().partition(|&&r| col[r as usize] as usize <= split.bin);
        let l = tree.nodes.len();
        tree.nodes.push(Node::Leaf { value: leaf(&lrows) });
        tree.nodes.push(Node::Leaf { value: leaf(&rrows) });
        tree.nodes[c.node] = Node::Split {
            feature: split.feature,
            threshold: table.thresholds[split.feature][split.bin],
            left: l,
            right: l + 1,
            default_left: true,
        };
        leaves += 1;
        for (node, child) in [(l, lrows), (l + 1, rrows)] {
            let depth = c.depth + 1;
            let best = if splittable(depth) {
                best_split(table, grad, &child, features, cfg)
            } else {
                None
            };
            open.push(Candidate {
                node,
                depth,
                rows: child,
                best,
            });
        }
    }
    tree
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GrowConfig {
        GrowConfig {
            num_leaves: 1000,
            max_depth: 1000,
            min_child_rows: 1,
            reg_lambda: 0.0,
            reg_alpha: 0.0,
            shrinkage: 1.0,
        }
    }

    #[test]
    fn distinct_values_get_their_own_bins() {
        let t = bin_thresholds(&[3.0, 1.0, 2.0, 2.0], 255);
        assert_eq!(t, vec![1.5, 2.5]);
    }

    #[test]
    fn equal_frequency_bins() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let t = bin_thresholds(&v, 4);
        assert_eq!(t, vec![249.5, 499.5, 749.5]);
        // Heavy ties never straddle a cut.
        let v: Vec<f64> = (0..1000).map(|i| (i / 300) as f64).collect();
        let t = bin_thresholds(&v, 3);
        assert!(t.iter().all(|x| x.fract() == 0.5), "{t:?}");
    }

    #[test]
    fn adjacent_floats_split_correctly() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = bin_thresholds(&[a, b], 255);
        assert!(a <= t[0] && b > t[0]);
    }

    #[test]
    fn step_function_one_split() {
        let x: Vec<f64> = (-10..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v < 0.0 { 0.2 } else { 0.8 }).collect();
        let table = BinnedTable::new(&x, 1, 255).unwrap();
        let grad: Vec<f64> = y.iter().map(|t| -t).collect();
        let tree = grow_tree(&table, &grad, (0..20).collect(), &[0], &cfg());
        assert_eq!(tree.num_leaves(), 2);
        for (xi, yi) in x.iter().zip(&y) {
            assert!((tree.predict(&[*xi]) - yi).abs() < 1e-12);
        }
    }

    #[test]
    fn caps_are_respected() {
        let x: Vec<f64> = (0..64).map(|i| ((i * 37) % 64) as f64).collect();
        let grad: Vec<f64> = x.iter().map(|v| (v * 0.7).sin()).collect();
        let table = BinnedTable::new(&x, 1, 255).unwrap();
        for (leaves, depth, min) in [(5, 10, 1), (100, 3, 1), (100, 100, 7)] {
            let c = GrowConfig {
                num_leaves: leaves,
                max_depth: depth,
                min_child_rows: min,
                ..cfg()
            };
            let t = grow_tree(&table, &grad, (0..64).collect(), &[0], &c);
            assert!(t.num_leaves() <= leaves);
            assert!(t.depth() <= depth);
            t.validate(1).unwrap();
        }
    }
}
