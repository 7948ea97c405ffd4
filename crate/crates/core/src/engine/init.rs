use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::params::ParameterSet;
use super::spec::NetworkSpec;
use crate::error::Result;
use crate::rng;

/// Weight initialization scheme. Biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    XavierNormal,
    HeNormal,
    Orthogonal,
    Normal,
    TruncatedNormal,
}

impl InitKind {
    pub const ALL: [InitKind; 5] = [
        InitKind::XavierNormal,
        InitKind::HeNormal,
        InitKind::Orthogonal,
        InitKind::Normal,
        InitKind::TruncatedNormal,
    ];

    /// Integer code used by the hyperparameter feature encoding.
    pub fn code(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            InitKind::XavierNormal => "xavier_normal",
            InitKind::HeNormal => "he_normal",
            InitKind::Orthogonal => "orthogonal",
            InitKind::Normal => "normal",
            InitKind::TruncatedNormal => "truncated_normal",
        }
    }
}

/// An initializer together with its variance knob.
///
/// `variance` multiplies the scheme's native variance, so the native standard
/// deviation is scaled by `sqrt(variance)`. For `normal` and `truncated_normal`
/// the native variance is 1; orthogonal matrices get gain `sqrt(variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Initializer {
    pub kind: InitKind,
    pub variance: f64,
}

fn fans(shape: &[usize]) -> (f64, f64) {
    match shape {
        [k1, k2, cin, cout] => ((k1 * k2 * cin) as f64, (k1 * k2 * cout) as f64),
        [fin, fout] => (*fin as f64, *fout as f64),
        _ => unreachable!("kernels are 2-d or 4-d"),
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Standard normal truncated to [-2, 2] by resampling.
fn truncated<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let v = normal(rng);
        if v.abs() <= 2.0 {
            return v;
        }
    }
}

/// Fill a `rows x cols` row-major matrix with orthonormal rows or columns,
/// whichever is fewer, scaled by `gain`.
pub(crate) fn orthogonal<R: Rng>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    // Orthonormalize the columns of a tall (long x short) Gaussian matrix by
    // modified Gram-Schmidt, then transpose back if the target is wide.
    let (long, short) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let mut q: Vec<Vec<f64>> = (0..short)
        .map(|_| (0..long).map(|_| normal(rng)).collect())
        .collect();
    for j in 0..short {
        for i in 0..j {
            let (done, rest) = q.split_at_mut(j);
            let dot: f64 = done[i].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
            for (x, y) in rest[0].iter_mut().zip(&done[i]) {
                *x -= dot * y;
            }
        }
        let norm = q[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        q[j].iter_mut().for_each(|x| *x /= norm);
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = gain * if rows >= cols { q[c][r] } else { q[r][c] };
        }
    }
    out
}

/// Deterministic initialization for a fixed `(spec, init, seed)`.
pub fn init_params(spec: &NetworkSpec, init: Initializer, seed: u64) -> Result<ParameterSet<f32>> {
    let mut params = ParameterSet::<f32>::zeros_for(spec)?;
    let layout = params.layout().clone();
    let scale = init.variance.sqrt();
    for (i, l) in layout.layers.iter().enumerate() {
        let mut rng = rng::stream(seed, &[rng::tag::INIT, i as u64]);
        let (fan_in, fan_out) = fans(&l.kernel_shape);
        let values: Vec<f64> = match init.kind {
            InitKind::XavierNormal => {
                let std = (2.0 / (fan_in + fan_out)).sqrt() * scale;
                (0..l.kernel_len).map(|_| std * normal(&mut rng)).collect()
            }
            InitKind::HeNormal => {
                let std = (2.0 / fan_in).sqrt() * scale;
                (0..l.kernel_len).map(|_| std * normal(&mut rng)).collect()
            }
            InitKind::Normal => (0..l.kernel_len).map(|_| scale * normal(&mut rng)).collect(),
            InitKind::TruncatedNormal => (0..l.kernel_len).map(|_| scale * truncated(&mut rng)).collect(),
            InitKind::Orthogonal => {
                let cols = *l.kernel_shape.last().unwrap();
                orthogonal(l.kernel_len / cols, cols, scale, &mut rng)
            }
        };
        for (dst, v) in params.kernel_mut(i).iter_mut().zip(values) {
            *dst = v as f32;
        }
    }
    Ok(params)
}
