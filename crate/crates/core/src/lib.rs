//! Populations of small trained networks, and regressors that predict each
//! network's test accuracy from its weights alone.
//!
//! The crate covers the whole pipeline:
//!
//! - [`engine`]: a deterministic CPU engine for a 4,970-parameter CNN and for
//!   MLPs, with SGD, Adam and RMSProp.
//! - [`data`]: IDX image files, synthetic datasets, subsampling.
//! - [`zoo`]: hyperparameter sweeps, training, checkpoints and manifests.
//! - [`features`]: flattened weights, per-layer statistics, norms,
//!   hyperparameter encodings.
//! - [`estimators`]: logit-linear, gradient-boosted trees, random forest and
//!   DNN regressors, with random search under k-fold cross-validation.
//! - [`metrics`]: MSE, MAD, R², Kendall's tau-b, transfer matrices and
//!   invariance probes.
//!
//! A guide with worked examples lives in the `book/` directory of the
//! repository; its code listings run as doc-tests of this crate.

pub mod data;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod features;
pub mod metrics;
pub mod rng;
pub mod zoo;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/engine.md")]
    struct Engine;
    #[doc = include_str!("../../../book/src/zoo.md")]
    struct Zoo;
    #[doc = include_str!("../../../book/src/features.md")]
    struct Features;
    #[doc = include_str!("../../../book/src/estimators.md")]
    struct Estimators;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/probes.md")]
    struct Probes;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
