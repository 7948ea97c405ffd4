//! Feature vectors computed from trained weights.
//!
//! Layers are numbered from 1 in names (`L1.kernel.mean`, `L4.bias.q75`,
//! `L2.kernel.17`); `Lfinal` names the last parameter layer in
//! architecture-agnostic subsets.

mod extract;
mod kind;
mod stats;
mod table;

pub use extract::{encode_hyperparams, extract, layer_norms, FeatureVector, HYPERPARAM_NAMES};
pub use kind::{FeatureKind, LayerRef};
pub use stats::{percentile_sorted, stat_block, StatBlock, PERCENTILES, STAT_NAMES};
pub use table::{featurize_zoo, FeatureTable, TABLE_FORMAT_VERSION};
