use crate::error::{Error, Result};

fn check(truth: &[f64], pred: &[f64], min_len: usize) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::validation(format!("{} values vs {} predictions", truth.len(), pred.len())));
    }
    if truth.len() < min_len {
        return Err(Error::validation(format!("need at least {min_len} values")));
    }
    if truth.iter().chain(pred).any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite value"));
    }
    Ok(())
}

pub fn mse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check(truth, pred, 1)?;
    Ok(truth.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).sum::<f64>() / truth.len() as f64)
}

/// Mean absolute deviation between predictions and truth.
pub fn mad(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check(truth, pred, 1)?;
    Ok(truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / truth.len() as f64)
}

/// `1 - MSE(pred) / MSE(mean of truth)`; undefined when the truth is constant.
pub fn r2_score(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check(truth, pred, 1)?;
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedScore("R² of constant true values".into()));
    }
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Number of pairs among runs of equal values in a sorted slice.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for i in 1..=sorted.len() {
        if i < sorted.len() && sorted[i] == sorted[i - 1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total
}

/// Sort `v` and return the number of strictly inverted pairs it contained.
fn sort_counting_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_inversions(&mut v[..mid], buf) + sort_counting_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        // Equal values are not inversions; take from the left first.
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Pair counts behind Kendall's tau-b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TauCounts {
    pub pairs: u64,
    /// Pairs tied in `a`.
    pub ties_a: u64,
    /// Pairs tied in `b`.
    pub ties_b: u64,
    /// Concordant minus discordant pairs.
    pub score: i64,
}

impl TauCounts {
    pub fn tau_b(&self) -> Result<f64> {
        let da = self.pairs - self.ties_a;
        let db = self.pairs - self.ties_b;
        if da == 0 || db == 0 {
            return Err(Error::UndefinedScore("Kendall's tau of an all-tied ranking".into()));
        }
        Ok(self.score as f64 / ((da as f64) * (db as f64)).sqrt())
    }
}

/// Pair counts in O(n log n): sort by (a, b), then count the inversions a
/// merge sort of `b` performs.
pub fn tau_counts(a: &[f64], b: &[f64]) -> Result<TauCounts> {
    check(a, b, 2)?;
    // Adding zero maps -0.0 to 0.0, so the sort order agrees with `==`.
    let a: Vec<f64> = a.iter().map(|x| x + 0.0).collect();
    let b: Vec<f64> = b.iter().map(|x| x + 0.0).collect();
    let n = a.len() as u64;
    let mut idx: Vec<usize> = (0..a.len()).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));
    let sa: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
    let pairs_ab: Vec<(f64, f64)> = idx.iter().map(|&i| (a[i], b[i])).collect();
    let ties_a = tied_pairs(&sa);
    let ties_ab = tied_pairs(&pairs_ab);
    let mut sb: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let mut buf = Vec::with_capacity(sb.len());
    let discordant = sort_counting_inversions(&mut sb, &mut buf);
    let ties_b = tied_pairs(&sb);
    let pairs = n * (n - 1) / 2;
    // Pairs untied in both: concordant + discordant = pairs - ties_a - ties_b + ties_ab.
    let untied = pairs + ties_ab - ties_a - ties_b;
    let score = untied as i64 - 2 * discordant as i64;
    Ok(TauCounts {
        pairs,
        ties_a,
        ties_b,
        score,
    })
}

/// Kendall's tau-b rank correlation.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    tau_counts(a, b)?.tau_b()
}
