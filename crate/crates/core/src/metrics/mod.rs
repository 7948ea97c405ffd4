//! Scores, holdout evaluation, transfer matrices and weight-space probes.

mod eval;
mod probe;
mod scores;

pub use eval::{evaluate, transfer_matrix, EvalReport, TransferMatrix, REPORT_FORMAT_VERSION};
pub use probe::{apply_modification, invariance_probe, ProbeKind, ProbeModification, ProbeResult};
pub use scores::{kendall_tau, mad, mse, r2_score, tau_counts, TauCounts};
