//! Accuracy predictors: boosted trees, random forest, logit-linear and
//! fully-connected regressors, and cross-validated random search.
//!
//! Tree ensembles clamp their output to [0, 1]; the network regressors end in
//! a sigmoid.

mod forest;
mod gbm;
mod model;
mod nn;
mod search;
pub mod tree;

pub use forest::{fit_forest_raw, ForestConfig, DEFAULT_FOREST_TREES};
pub use gbm::{
    fit_gbm_raw, GbmConfig, GbmFit, DEFAULT_MIN_CHILD_SAMPLES, DEFAULT_NUM_TREES, HIGH_DIM, MAX_BINS, NUM_TREES_RANGE, SUBSAMPLES,
};
pub use model::{
    feature_importance, fit, fit_dnn, fit_gbm, fit_logit_linear, fit_random_forest, EstimatorConfig, EstimatorKind,
    EstimatorModel, Fitted, MODEL_FORMAT_VERSION,
};
pub use nn::{
    fit_nn_raw, NnConfig, NnFit, DEFAULT_NN_EPOCHS, DNN_LAYERS, DNN_MAX_DROPOUT, DNN_UNITS, NN_BATCH_SIZES,
    NN_INIT_VARIANCE_RANGE, NN_L2_RANGE, NN_LR_RANGE, NN_OPTIMIZERS,
};
pub use search::{
    cross_validate, fold_indices, random_search, sample_config, sample_configs, ConfigOutcome, CvReport, CvScore,
};
pub use tree::{Node, Tree};
