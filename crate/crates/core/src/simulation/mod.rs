//! Simulated studies with known partial correlation, and the Monte Carlo
//! coverage experiment built on them.

mod coverage;
mod design;

pub use coverage::{
    quantile_sorted, run_coverage_experiment, run_coverage_experiment_with, CoverageReport, ExperimentSettings,
    FailedReplicate, IntervalRecord, Method, MethodSummary, Quartiles, ReplicateRecord, MAX_FAILED_REPLICATES,
};
pub use design::{
    generate_dataset, replicate_rng, simulate_sample, true_rho, Coefficients, CovariateModel, OlderAdultCovariates,
    SimulatedSample, SimulationDesign, COLUMN_NAMES,
};
