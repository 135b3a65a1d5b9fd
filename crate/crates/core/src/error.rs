use thiserror::Error;

use crate::model::RegularityReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("design matrix is rank deficient: {0}")]
    Design(String),

    #[error("insufficient data: {rows} rows for {cols} parameters")]
    InsufficientData { rows: usize, cols: usize },

    #[error("degenerate selection indicator: all {n} rows are {}", if *.all_observed { "observed" } else { "missing" })]
    Degenerate { n: usize, all_observed: bool },

    #[error("quasi-complete separation in probit fit: standardized coefficient {index} reached {value:.3}")]
    Separation { index: usize, value: f64 },

    #[error("probit fit did not converge after {iterations} iterations (gradient max-norm {gradient:.3e})")]
    NotConverged { iterations: usize, gradient: f64 },

    #[error("mask pattern does not match mechanism {mechanism}: {reason}")]
    Mechanism { mechanism: String, reason: String },

    #[error("regularity assumption violated: {}", .0.summary())]
    Regularity(Box<RegularityReport>),

    #[error("negative radicand {radicand:.6e} in standard error (variance factor {factor:.6e})")]
    NegativeRadicand { radicand: f64, factor: f64 },

    #[error("uncertainty region unreliable: {failed} of {total} grid points failed")]
    UnreliableRegion { failed: usize, total: usize, failures: Vec<(f64, f64, String)> },

    #[error("experiment invalid: {failed} of {replicates} replicates failed")]
    Experiment { failed: usize, replicates: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
