//! Partial correlation under outcome-dependent missingness.
//!
//! Estimates the partial correlation between a target and a partner variable,
//! adjusting for a set of covariates, when the target (and possibly the
//! partner) is missing not at random. The missingness is modelled by a probit
//! selection equation whose error correlates with the outcome error through
//! a sensitivity parameter `γ`. For each `γ` the crate returns bias-corrected
//! estimates and a Wald interval; over a box of `γ` values it returns the
//! union of those intervals.

pub mod error;
pub mod estimators;
pub mod exec;
pub mod inference;
pub mod model;
pub mod probit;
pub mod regression;
pub mod simulation;

pub use error::{Error, Result};
pub use estimators::{estimate, estimate_mdm_a, estimate_mdm_b, estimate_mdm_c, CorrectedEstimates, PreparedEstimator};
pub use exec::Execution;
pub use inference::{confidence_interval, uncertainty_region, Interval, UncertaintyRegion};
pub use model::{rho_from_components, validate_regularity, Dataset, GammaBox, Mechanism, RegularityReport, Roles};
pub use probit::{fit_probit, inverse_mills, ProbitFit};
pub use regression::{ols_fit, OlsFit};
pub use simulation::{generate_dataset, run_coverage_experiment, true_rho, CoverageReport, SimulationDesign};
