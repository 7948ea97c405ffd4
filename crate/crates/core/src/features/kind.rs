use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A layer reference inside a layer subset: a 1-based index or the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerRef {
    Index(usize),
    Final,
}

impl LayerRef {
    /// 0-based position in a network with `num_layers` parameter layers.
    pub fn resolve(self, num_layers: usize) -> Result<usize> {
        match self {
            LayerRef::Final if num_layers > 0 => Ok(num_layers - 1),
            LayerRef::Index(i) if i >= 1 && i <= num_layers => Ok(i - 1),
            other => Err(Error::validation(format!(
                "layer {other} absent from a network with {num_layers} parameter layers"
            ))),
        }
    }
}

impl fmt::Display for LayerRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerRef::Index(i) => write!(f, "{i}"),
            LayerRef::Final => f.write_str("final"),
        }
    }
}

impl FromStr for LayerRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "final" {
            return Ok(LayerRef::Final);
        }
        match s.parse::<usize>() {
            Ok(i) if i >= 1 => Ok(LayerRef::Index(i)),
            _ => Err(Error::validation(format!("bad layer reference {s:?} (1-based index or \"final\")"))),
        }
    }
}

/// Which feature vector to compute from a network.
///
/// Textual form: `flat_all`, `flat_layer:4`, `stats_layer_subset:1,4`,
/// `stats_layer_subset:final`, and the plain names of the other variants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FeatureKind {
    /// Every parameter in storage order.
    FlatAll,
    /// The parameters of one layer (1-based).
    FlatLayer(usize),
    /// Statistics of the whole flattened parameter vector.
    StatsGlobal,
    /// Statistics of every layer's kernel and bias.
    StatsPerLayer,
    /// [`FeatureKind::StatsPerLayer`] restricted to some layers.
    StatsLayerSubset(Vec<LayerRef>),
    NormsL1,
    NormsL2,
    /// The training configuration.
    Hyperparams,
    /// The learning rate alone.
    HyperparamsLr,
    /// The training configuration followed by every parameter.
    HyperparamsPlusFlat,
    /// Per layer, max minus min of the bias.
    BiasRange,
}

impl FeatureKind {
    pub fn needs_hyperparams(&self) -> bool {
        matches!(
            self,
            FeatureKind::Hyperparams | FeatureKind::HyperparamsLr | FeatureKind::HyperparamsPlusFlat
        )
    }

    /// Whether the feature names depend only on the number of layers, not their shapes.
    pub fn shape_agnostic(&self) -> bool {
        !matches!(
            self,
            FeatureKind::FlatAll | FeatureKind::FlatLayer(_) | FeatureKind::HyperparamsPlusFlat
        )
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::FlatAll => f.write_str("flat_all"),
            FeatureKind::FlatLayer(l) => write!(f, "flat_layer:{l}"),
            FeatureKind::StatsGlobal => f.write_str("stats_global"),
            FeatureKind::StatsPerLayer => f.write_str("stats_per_layer"),
            FeatureKind::StatsLayerSubset(set) => {
                let parts: Vec<String> = set.iter().map(|l| l.to_string()).collect();
                write!(f, "stats_layer_subset:{}", parts.join(","))
            }
            FeatureKind::NormsL1 => f.write_str("norms_l1"),
            FeatureKind::NormsL2 => f.write_str("norms_l2"),
            FeatureKind::Hyperparams => f.write_str("hyperparams"),
            FeatureKind::HyperparamsLr => f.write_str("hyperparams_lr"),
            FeatureKind::HyperparamsPlusFlat => f.write_str("hyperparams_plus_flat"),
            FeatureKind::BiasRange => f.write_str("bias_range"),
        }
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let kind = match (head, arg) {
            ("flat_all", None) => FeatureKind::FlatAll,
            ("flat_layer", Some(a)) => match a.parse::<usize>() {
                Ok(l) if l >= 1 => FeatureKind::FlatLayer(l),
                _ => return Err(Error::validation(format!("bad layer index in {s:?}"))),
            },
            ("stats_global", None) => FeatureKind::StatsGlobal,
            ("stats_per_layer", None) => FeatureKind::StatsPerLayer,
            ("stats_layer_subset", Some(a)) => {
                let set = a.split(',').map(|p| p.trim().parse()).collect::<Result<Vec<LayerRef>>>()?;
                if set.is_empty() {
                    return Err(Error::validation("empty layer subset"));
                }
                FeatureKind::StatsLayerSubset(set)
            }
            ("norms_l1", None) => FeatureKind::NormsL1,
            ("norms_l2", None) => FeatureKind::NormsL2,
            ("hyperparams", None) => FeatureKind::Hyperparams,
            ("hyperparams_lr", None) => FeatureKind::HyperparamsLr,
            ("hyperparams_plus_flat", None) => FeatureKind::HyperparamsPlusFlat,
            ("bias_range", None) => FeatureKind::BiasRange,
            _ => return Err(Error::validation(format!("unknown feature kind {s:?}"))),
        };
        Ok(kind)
    }
}

impl TryFrom<String> for FeatureKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureKind> for String {
    fn from(k: FeatureKind) -> String {
        k.to_string()
    }
}
