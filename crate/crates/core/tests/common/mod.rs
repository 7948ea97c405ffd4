//! Independent reference implementations used by the integration and acceptance tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weightzoo::engine::{Activation, LayerSpec, Net, NetworkSpec, ParameterSet, Targets};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Kendall's tau-b by counting all pairs. Returns `None` when undefined.
pub fn kendall_naive(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    let (mut score, mut ties_a, mut ties_b) = (0i64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if da == 0.0 {
                ties_a += 1;
            }
            if db == 0.0 {
                ties_b += 1;
            }
            if da != 0.0 && db != 0.0 {
                score += if (da > 0.0) == (db > 0.0) { 1 } else { -1 };
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as u64;
    let (x, y) = (pairs - ties_a, pairs - ties_b);
    if x == 0 || y == 0 {
        return None;
    }
    Some(score as f64 / ((x as f64) * (y as f64)).sqrt())
}

/// Best root split by trying every midpoint between consecutive distinct
/// values of every feature, with the same gain formula and tie rules
/// (lowest feature, then lowest threshold, strict improvement).
///
/// Returns `(feature, threshold, gain)`.
pub fn exhaustive_split(
    x: &[Vec<f64>],
    y: &[f64],
    min_rows: usize,
    lambda: f64,
    alpha: f64,
) -> Option<(usize, f64, f64)> {
    let n = y.len();
    let d = x[0].len();
    let mean = y.iter().sum::<f64>() / n as f64;
    // Gradients of squared error at the mean prediction.
    let g: Vec<f64> = y.iter().map(|t| mean - t).collect();
    let soft = |v: f64| {
        if v > alpha {
            v - alpha
        } else if v < -alpha {
            v + alpha
        } else {
            0.0
        }
    };
    let score = |s: f64, c: f64| soft(s).powi(2) / (c + lambda);
    let total: f64 = g.iter().sum();
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..d {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = w[0] + (w[1] - w[0]) / 2.0;
            let (mut gl, mut nl) = (0.0, 0usize);
            for i in 0..n {
                if x[i][f] <= thr {
                    gl += g[i];
                    nl += 1;
                }
            }
            if nl < min_rows || n - nl < min_rows {
                continue;
            }
            let gr: f64 = g.iter().sum::<f64>() - gl;
            let gain = score(gl, nl as f64) + score(gr, (n - nl) as f64) - score(total, n as f64);
            if gain > 1e-12 && best.is_none_or(|b| gain > b.2 * (1.0 + 1e-9)) {
                best = Some((f, thr, gain));
            }
        }
    }
    best
}

/// A random small network: either a conv stack (with optional pooling) or an MLP.
pub fn random_spec<R: Rng>(r: &mut R, activation: Option<Activation>) -> NetworkSpec {
    let act = |r: &mut R| {
        activation.unwrap_or(if r.random_bool(0.5) {
            Activation::Relu
        } else {
            Activation::Tanh
        })
    };
    let classes = r.random_range(2..5);
    if r.random_bool(0.6) {
        let h = r.random_range(4..9);
        let w = r.random_range(4..9);
        let c = r.random_range(1..3);
        let mut layers = Vec::new();
        for _ in 0..r.random_range(1..4) {
            layers.push(LayerSpec::conv(
                r.random_range(2..5),
                r.random_range(1..4),
                r.random_range(1..3),
                act(r),
            ));
        }
        if r.random_bool(0.7) {
            layers.push(LayerSpec::global_avg_pool());
        }
        if r.random_bool(0.5) {
            layers.push(LayerSpec::dense(r.random_range(2..6), act(r)));
        }
        layers.push(LayerSpec::dense(classes, Activation::None));
        NetworkSpec {
            input_shape: (h, w, c),
            num_classes: classes,
            layers,
        }
    } else {
        let hidden: Vec<usize> = (0..r.random_range(1..4)).map(|_| r.random_range(2..8)).collect();
        let a = act(r);
        NetworkSpec::mlp(r.random_range(2..10), &hidden, classes, a, 0.0)
    }
}

/// Random parameters with biases drawn too (unless `zero_bias`).
pub fn random_params<R: Rng>(r: &mut R, spec: &NetworkSpec, scale: f64, zero_bias: bool) -> ParameterSet<f64> {
    let mut p = ParameterSet::<f64>::zeros_for(spec).unwrap();
    for l in 0..p.num_layers() {
        for v in p.kernel_mut(l) {
            *v = r.random_range(-scale..scale);
        }
        if !zero_bias {
            for v in p.bias_mut(l) {
                *v = r.random_range(-scale..scale);
            }
        }
    }
    p
}

pub fn random_batch<R: Rng>(r: &mut R, spec: &NetworkSpec, n: usize) -> (Vec<f64>, Vec<u8>) {
    let x = (0..n * spec.input_len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let y = (0..n).map(|_| r.random_range(0..spec.num_classes) as u8).collect();
    (x, y)
}

/// Largest relative error between backprop and central differences over all
/// parameters. The denominator is floored at `1e-6` so vanishing gradients do
/// not blow up the ratio.
pub fn max_gradient_error(spec: &NetworkSpec, params: &ParameterSet<f64>, x: &[f64], y: &[u8], l2: f64) -> f64 {
    let net = Net::new(spec).unwrap();
    let (_, grads) = net.loss_and_grads(params, x, Targets::Classes(y), l2, None).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut p = params.clone();
    for i in 0..params.len() {
        let orig = p.as_slice()[i];
        p.as_mut_slice()[i] = orig + h;
        let (up, _) = net.loss_and_grads(&p, x, Targets::Classes(y), l2, None).unwrap();
        p.as_mut_slice()[i] = orig - h;
        let (down, _) = net.loss_and_grads(&p, x, Targets::Classes(y), l2, None).unwrap();
        p.as_mut_slice()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.as_slice()[i];
        let err = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

/// Multiply every kernel by `c` and layer `l`'s bias by `c^(l+1)`, so a
/// bias-carrying ReLU network's logits scale by `c^L`.
pub fn scale_homogeneous(params: &ParameterSet<f64>, c: f64) -> ParameterSet<f64> {
    let mut out = params.clone();
    for l in 0..out.num_layers() {
        out.kernel_mut(l).iter_mut().for_each(|v| *v *= c);
        let f = c.powi(l as i32 + 1);
        out.bias_mut(l).iter_mut().for_each(|v| *v *= f);
    }
    out
}
