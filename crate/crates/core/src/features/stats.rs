use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Names of the [`StatBlock`] fields, in emission order.
pub const STAT_NAMES: [&str; 7] = ["mean", "variance", "q0", "q25", "q50", "q75", "q100"];

/// Percentiles reported by a [`StatBlock`].
pub const PERCENTILES: [f64; 5] = [0.0, 25.0, 50.0, 75.0, 100.0];

/// Summary statistics of one array.
///
/// The variance divides by `n`. Percentile `q` interpolates linearly between
/// the order statistics around index `q / 100 * (n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatBlock {
    pub mean: f64,
    pub variance: f64,
    pub q0: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q100: f64,
}

impl StatBlock {
    pub fn to_array(&self) -> [f64; 7] {
        [self.mean, self.variance, self.q0, self.q25, self.q50, self.q75, self.q100]
    }
}

/// Percentile of already sorted values.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn stat_block<T: Copy + Into<f64>>(values: &[T]) -> Result<StatBlock> {
    if values.is_empty() {
        return Err(Error::validation("statistics of an empty array"));
    }
    let mut v: Vec<f64> = values.iter().map(|&x| x.into()).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("statistics of a non-finite array"));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let variance = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    v.sort_by(f64::total_cmp);
    let q = PERCENTILES.map(|p| percentile_sorted(&v, p));
    Ok(StatBlock {
        mean,
        variance,
        q0: q[0],
        q25: q[1],
        q50: q[2],
        q75: q[3],
        q100: q[4],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_to_five() {
        let s = stat_block(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.to_array(), [3.0, 2.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn constant_array() {
        let s = stat_block(&[0.3f32; 11]).unwrap();
        let c = 0.3f32 as f64;
        assert_eq!(s.to_array(), [c, 0.0, c, c, c, c, c]);
    }

    #[test]
    fn interpolated_quartile() {
        let s = stat_block(&[0.0, 10.0]).unwrap();
        assert_eq!(s.q25, 2.5);
        assert_eq!(s.q50, 5.0);
        assert_eq!(s.q75, 7.5);
    }

    #[test]
    fn single_value() {
        let s = stat_block(&[-2.0]).unwrap();
        assert_eq!(s.to_array(), [-2.0, 0.0, -2.0, -2.0, -2.0, -2.0, -2.0]);
    }

    #[test]
    fn empty_and_nan_rejected() {
        assert!(stat_block::<f64>(&[]).is_err());
        assert!(stat_block(&[1.0, f64::NAN]).is_err());
    }
}
