use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::engine::ParameterSet;
use crate::error::{Error, Result};
use crate::estimators::EstimatorModel;
use crate::features::{extract, FeatureKind};
use crate::rng;
use crate::zoo::ZooCollection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Shuffle across the whole network.
    GlobalPermute,
    /// Shuffle within each layer.
    PermuteAllLayers,
    /// Shuffle within each layer except the last.
    PermuteConvLayers,
    /// Shuffle within the last layer.
    PermuteFinalLayer,
    /// Multiply every parameter by `factor`.
    Scale,
}

/// A weight-space transformation used to probe an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeModification {
    pub kind: ProbeKind,
    /// Let kernel and bias values trade places; otherwise each is shuffled among its own kind.
    pub mix_bias_weights: bool,
    pub factor: f64,
    pub seed: u64,
}

impl ProbeModification {
    pub fn permute(kind: ProbeKind, mix_bias_weights: bool, seed: u64) -> Self {
        ProbeModification {
            kind,
            mix_bias_weights,
            factor: 1.0,
            seed,
        }
    }

    pub fn scale(factor: f64) -> Self {
        ProbeModification {
            kind: ProbeKind::Scale,
            mix_bias_weights: false,
            factor,
            seed: 0,
        }
    }

    pub fn identity() -> Self {
        Self::scale(1.0)
    }

    pub fn label(&self) -> String {
        match self.kind {
            ProbeKind::Scale => format!("scale({})", self.factor),
            k => {
                let name = serde_json::to_value(k).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                format!("{name}({})", if self.mix_bias_weights { "mixing" } else { "not mixing" })
            }
        }
    }
}

fn shuffle_positions(data: &mut [f32], positions: &[usize], seed: u64, group: u64) {
    let mut values: Vec<f32> = positions.iter().map(|&i| data[i]).collect();
    values.shuffle(&mut rng::stream(seed, &[rng::tag::PROBE, group]));
    for (&i, v) in positions.iter().zip(values) {
        data[i] = v;
    }
}

/// Apply `m` to a copy of `params`. The result has the same layout.
pub fn apply_modification(params: &ParameterSet<f32>, m: &ProbeModification) -> Result<ParameterSet<f32>> {
    if m.kind == ProbeKind::Scale {
        if !(m.factor > 0.0 && m.factor.is_finite()) {
            return Err(Error::validation(format!("scale factor {} must be positive", m.factor)));
        }
        let mut out = params.clone();
        out.as_mut_slice().iter_mut().for_each(|v| *v = (*v as f64 * m.factor) as f32);
        return Ok(out);
    }
    let layers = &params.layout().layers;
    let nl = layers.len();
    let scope: Vec<usize> = match m.kind {
        ProbeKind::GlobalPermute | ProbeKind::PermuteAllLayers => (0..nl).collect(),
        ProbeKind::PermuteConvLayers => (0..nl.saturating_sub(1)).collect(),
        ProbeKind::PermuteFinalLayer => vec![nl - 1],
        ProbeKind::Scale => unreachable!(),
    };
    let kernel = |l: usize| layers[l].kernel_offset..layers[l].kernel_offset + layers[l].kernel_len;
    let bias = |l: usize| layers[l].bias_offset..layers[l].bias_offset + layers[l].bias_len;
    // Each group is a set of flat positions whose values are shuffled among themselves.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    if m.kind == ProbeKind::GlobalPermute {
        let k: Vec<usize> = scope.iter().flat_map(|&l| kernel(l)).collect();
        let b: Vec<usize> = scope.iter().flat_map(|&l| bias(l)).collect();
        if m.mix_bias_weights {
            groups.push(k.into_iter().chain(b).collect());
        } else {
            groups.push(k);
            groups.push(b);
        }
    } else {
        for &l in &scope {
            if m.mix_bias_weights {
                groups.push(kernel(l).chain(bias(l)).collect());
            } else {
                groups.push(kernel(l).collect());
                groups.push(bias(l).collect());
            }
        }
    }
    let mut out = params.clone();
    for (g, positions) in groups.iter().enumerate() {
        shuffle_positions(out.as_mut_slice(), positions, m.seed, g as u64);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub label: String,
    pub modification: ProbeModification,
    /// Mean over sampled networks of `|F(modified) - F(original)|`.
    pub mad: f64,
    pub n: usize,
}

/// Mean absolute change of a flat-weights estimator's prediction under each modification.
///
/// `sample_count` networks are drawn (seeded) from the ok records of `zoo`.
/// Each network gets its own permutation, derived from the modification seed
/// and the network's position in the sample.
pub fn invariance_probe(
    model: &EstimatorModel,
    zoo: &ZooCollection,
    modifications: &[ProbeModification],
    sample_count: usize,
    seed: u64,
) -> Result<Vec<ProbeResult>> {
    if model.feature_kind != FeatureKind::FlatAll {
        return Err(Error::validation(format!(
            "invariance probes need a flat_all model, got {}",
            model.feature_kind
        )));
    }
    let ok: Vec<_> = zoo.ok_records().collect();
    if sample_count == 0 || sample_count > ok.len() {
        return Err(Error::validation(format!(
            "cannot sample {sample_count} of {} networks",
            ok.len()
        )));
    }
    let mut picked = index::sample(&mut rng::stream(seed, &[rng::tag::PROBE]), ok.len(), sample_count).into_vec();
    picked.sort_unstable();
    let mut sums = vec![0.0f64; modifications.len()];
    for (s, &i) in picked.iter().enumerate() {
        let params = zoo.params(ok[i])?;
        let base = extract(&params, &FeatureKind::FlatAll, None)?;
        let y0 = model.predict(&base.names, &base.values)?;
        for (sum, m) in sums.iter_mut().zip(modifications) {
            let per_net = ProbeModification {
                seed: rng::derive_seed(m.seed, &[s as u64]),
                ..*m
            };
            let fv = extract(&apply_modification(&params, &per_net)?, &FeatureKind::FlatAll, None)?;
            *sum += (model.predict(&fv.names, &fv.values)? - y0).abs();
        }
    }
    Ok(modifications
        .iter()
        .zip(sums)
        .map(|(m, s)| ProbeResult {
            label: m.label(),
            modification: *m,
            mad: s / sample_count as f64,
            n: sample_count,
        })
        .collect())
}
