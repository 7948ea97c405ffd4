//! Seed derivation.
//!
//! Every stochastic step in the pipeline draws from a ChaCha8 stream whose seed
//! is a hash of the parent seed and a small tuple of integers naming the step.
//! Streams never share state, so work can be reordered or parallelized without
//! changing any result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a parent seed together with a path of sub-keys.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(seed), |acc, &k| mix64(acc ^ mix64(k.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Stream tags, so that independent consumers of one seed never collide.
pub(crate) mod tag {
    pub const HYPERPARAMS: u64 = 1;
    pub const MODEL_SEED: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const DROPOUT: u64 = 5;
    pub const SUBSAMPLE: u64 = 6;
    pub const SPLIT: u64 = 7;
    pub const SEARCH: u64 = 8;
    pub const FOLDS: u64 = 9;
    pub const TREE_ROWS: u64 = 10;
    pub const TREE_COLS: u64 = 11;
    pub const PROBE: u64 = 12;
    pub const SYNTH_PATTERN: u64 = 13;
    pub const SYNTH_SAMPLES: u64 = 14;
    pub const FIT: u64 = 15;
}
