//! Selection-bias corrected estimators of the partner slope, the two
//! residual variances, the partial correlation and its standard error.
//!
//! Everything that does not depend on the sensitivity parameters (probit
//! fits, complete-case QR factorizations, Mills-ratio projections) is
//! computed once in [`PreparedEstimator::new`]; evaluating a γ point is then
//! a handful of scalar operations, which keeps γ grids and Monte Carlo
//! replicates cheap.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_gamma, rho_from_components, Dataset, Mechanism, RegularityInputs, RegularityReport};
use crate::probit::{fit_probit, mills_vector, ProbitFit};
use crate::regression::{gram_rcond, LeastSquares};

/// Column of the partner variable in the target design `(1, partner, adjusters…)`.
pub const PARTNER_COLUMN: usize = 1;

/// Sufficient statistics of a Mills-ratio vector against a complete-case design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MillsSummary {
    pub n: usize,
    /// `ûᵀλ_û`
    pub u_dot_lambda: f64,
    /// `λ_ûᵀλ_û`
    pub lambda_sq_sum: f64,
    /// `λ_ûᵀX(XᵀX)⁻¹Xᵀλ_û`
    pub explained_ss: f64,
    /// `[(XᵀX)⁻¹Xᵀλ_û]₂`, the partner coefficient of λ regressed on the design.
    pub partner_coef: f64,
}

impl MillsSummary {
    pub fn new(u_hat: &[f64], mills: &[f64], design: &LeastSquares) -> Result<Self> {
        if u_hat.len() != mills.len() || mills.len() != design.n() {
            return Err(Error::Domain(format!(
                "index ({}), Mills ({}) and design ({}) lengths differ",
                u_hat.len(),
                mills.len(),
                design.n()
            )));
        }
        let proj = design.project(mills)?;
        Ok(Self {
            n: mills.len(),
            u_dot_lambda: u_hat.iter().zip(mills).map(|(u, l)| u * l).sum(),
            lambda_sq_sum: mills.iter().map(|l| l * l).sum(),
            explained_ss: proj.explained_ss,
            partner_coef: proj.coef.get(PARTNER_COLUMN).copied().unwrap_or(f64::NAN),
        })
    }

    /// `1 + γ²(ûᵀλ − λᵀX(XᵀX)⁻¹Xᵀλ)/df`
    pub fn denominator(&self, gamma: f64, df: usize) -> f64 {
        1.0 + gamma * gamma * (self.u_dot_lambda - self.explained_ss) / df as f64
    }
}

fn sigma_sq_from(ols_resid_var: f64, denominator: f64) -> Result<f64> {
    if denominator.abs() < crate::model::DENOMINATOR_THRESHOLD || !denominator.is_finite() {
        return Err(Error::Domain(format!("variance-correction denominator {denominator:.3e} is too close to zero")));
    }
    Ok(ols_resid_var / denominator)
}

fn beta2_from(ols_coef2: f64, gamma: f64, sigma1_hat: f64, partner_coef: f64) -> f64 {
    ols_coef2 - gamma * sigma1_hat * partner_coef
}

fn standard_error_from(
    sigma1_sq_hat: f64,
    gamma1: f64,
    summary: &MillsSummary,
    xtx_inv_22: f64,
    beta2_hat: f64,
    sigma2_sq_hat: f64,
) -> Result<f64> {
    let n = summary.n as f64;
    let g2 = gamma1 * gamma1;
    let factor = 1.0 + g2 * summary.u_dot_lambda / n - g2 * summary.lambda_sq_sum / n;
    let radicand = sigma1_sq_hat * factor * xtx_inv_22 / (beta2_hat * beta2_hat + sigma1_sq_hat / sigma2_sq_hat);
    if !radicand.is_finite() || radicand < 0.0 {
        return Err(Error::NegativeRadicand { radicand, factor });
    }
    Ok(radicand.sqrt())
}

/// Residual variance corrected for selection:
/// `σ̂²_ols / (1 + γ²(ûᵀλ_û − λ_ûᵀX(XᵀX)⁻¹Xᵀλ_û)/df)`.
pub fn corrected_sigma_sq(
    ols_resid_var: f64,
    gamma: f64,
    u_hat: &[f64],
    mills: &[f64],
    design: &LeastSquares,
    df: usize,
) -> Result<f64> {
    let summary = MillsSummary::new(u_hat, mills, design)?;
    sigma_sq_from(ols_resid_var, summary.denominator(gamma, df))
}

/// Partner slope corrected for selection: `β̂₂,ols − γσ̂₁[(XᵀX)⁻¹Xᵀλ_û]₂`.
pub fn corrected_beta2(
    ols_coef2: f64,
    gamma: f64,
    sigma1_hat: f64,
    design: &LeastSquares,
    mills: &[f64],
) -> Result<f64> {
    let proj = design.project(mills)?;
    let coef2 = *proj.coef.get(PARTNER_COLUMN).ok_or_else(|| Error::Domain("design has no partner column".into()))?;
    Ok(beta2_from(ols_coef2, gamma, sigma1_hat, coef2))
}

/// Standard error of ρ̂, already on the scale of the interval half-width
/// before multiplication by the normal quantile.
#[allow(clippy::too_many_arguments)]
pub fn standard_error(
    sigma1_sq_hat: f64,
    gamma1: f64,
    u_hat: &[f64],
    mills: &[f64],
    xtx_inv_22: f64,
    beta2_hat: f64,
    sigma2_sq_hat: f64,
    n: usize,
) -> Result<f64> {
    if u_hat.len() != n || mills.len() != n {
        return Err(Error::Domain(format!("expected {n} complete cases, got {} / {}", u_hat.len(), mills.len())));
    }
    let summary = MillsSummary {
        n,
        u_dot_lambda: u_hat.iter().zip(mills).map(|(u, l)| u * l).sum(),
        lambda_sq_sum: mills.iter().map(|l| l * l).sum(),
        explained_ss: f64::NAN,
        partner_coef: f64::NAN,
    };
    standard_error_from(sigma1_sq_hat, gamma1, &summary, xtx_inv_22, beta2_hat, sigma2_sq_hat)
}

/// Corrected estimates for one mechanism and one γ point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectedEstimates {
    pub mechanism: Mechanism,
    pub gamma1: f64,
    pub gamma2: f64,
    pub beta2_hat: f64,
    pub sigma1_sq_hat: f64,
    pub sigma2_sq_hat: f64,
    pub rho_hat: f64,
    pub se_hat: f64,
    pub n_rows: usize,
    pub n_complete: usize,
    /// Rows with the partner observed (mechanism C only).
    pub n2: Option<usize>,
    pub beta2_ols: f64,
    pub sigma1_sq_ols: f64,
    pub sigma2_sq_ols: f64,
    #[serde(skip)]
    pub probit_fits: Arc<Vec<ProbitFit>>,
}

/// γ-independent part of the estimator for one dataset and mechanism.
#[derive(Debug, Clone)]
pub struct PreparedEstimator {
    mechanism: Mechanism,
    n_rows: usize,
    n_complete: usize,
    n2: Option<usize>,
    df_target: usize,
    df_partner: usize,
    beta2_ols: f64,
    sigma1_sq_ols: f64,
    sigma2_sq_ols: f64,
    xtx_inv_22: f64,
    target: MillsSummary,
    partner: Option<MillsSummary>,
    rcond_target: f64,
    rcond_adjuster: f64,
    probits: Arc<Vec<ProbitFit>>,
}

fn converged(fit: ProbitFit) -> Result<ProbitFit> {
    if fit.converged {
        Ok(fit)
    } else {
        Err(Error::NotConverged { iterations: fit.iterations, gradient: fit.gradient_norm })
    }
}

impl PreparedEstimator {
    pub fn new(dataset: &Dataset, mechanism: Mechanism) -> Result<Self> {
        dataset.check_mechanism(mechanism)?;
        let p = dataset.n_vars();
        let all = dataset.all_rows();
        let complete = dataset.complete_rows();
        let roles = dataset.roles();

        let target_ls = LeastSquares::new(&dataset.target_design(&complete))?;
        let target_fit = target_ls.fit(&dataset.gather(roles.target, &complete))?;
        let n = complete.len();

        let (probits, u_hat, partner) = match mechanism {
            Mechanism::A | Mechanism::B => {
                let selection_design = match mechanism {
                    Mechanism::A => dataset.target_design(&all),
                    _ => dataset.adjuster_design(&all),
                };
                let fit = converged(fit_probit(&selection_design, dataset.target_observed())?)?;
                let u = fit.linear_index_u.clone();
                (vec![fit], u, None)
            }
            Mechanism::C => {
                let adjusters_all = dataset.adjuster_design(&all);
                let fit1 = converged(fit_probit(&adjusters_all, dataset.target_observed())?)?;
                let fit2 = converged(fit_probit(&adjusters_all, dataset.partner_observed())?)?;
                let u = fit1.linear_index(&dataset.adjuster_design(&complete));
                let partner_rows = dataset.partner_rows();
                let n2 = partner_rows.len();
                if n2 <= p {
                    return Err(Error::InsufficientData { rows: n2, cols: p });
                }
                let partner_ls = LeastSquares::new(&dataset.adjuster_design(&partner_rows))?;
                let w = fit2.linear_index_u.clone();
                let lambda_w = mills_vector(&fit2)?;
                let summary = MillsSummary::new(&w, &lambda_w, &partner_ls)?;
                let rss = partner_ls.fit(&dataset.gather(roles.partner, &partner_rows))?.rss;
                (vec![fit1, fit2], u, Some((summary, rss, n2, partner_ls.rcond())))
            }
        };

        let lambda_u = u_hat.iter().map(|&u| crate::probit::inverse_mills(u)).collect::<Result<Vec<_>>>()?;
        let target = MillsSummary::new(&u_hat, &lambda_u, &target_ls)?;

        let (sigma2_sq_ols, rcond_adjuster, partner, n2, df_partner) = match (mechanism, partner) {
            (Mechanism::C, Some((summary, rss, n2, rcond))) => {
                let df = n2 - p;
                (rss / df as f64, rcond, Some(summary), Some(n2), df)
            }
            _ => {
                let rows = if mechanism == Mechanism::A { &all } else { &complete };
                let ls = LeastSquares::new(&dataset.adjuster_design(rows))?;
                let fit = ls.fit(&dataset.gather(roles.partner, rows))?;
                (fit.residual_variance, ls.rcond(), None, None, rows.len() - ls.k())
            }
        };

        Ok(Self {
            mechanism,
            n_rows: dataset.n_rows(),
            n_complete: n,
            n2,
            df_target: n - p,
            df_partner,
            beta2_ols: target_fit.coef[PARTNER_COLUMN],
            sigma1_sq_ols: target_fit.residual_variance,
            sigma2_sq_ols,
            xtx_inv_22: target_ls.xtx_inv_diag(PARTNER_COLUMN),
            target,
            partner,
            rcond_target: target_ls.rcond(),
            rcond_adjuster,
            probits: Arc::new(probits),
        })
    }

    pub fn mechanism(&self) -> Mechanism {
        self.mechanism
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_complete(&self) -> usize {
        self.n_complete
    }

    pub fn n2(&self) -> Option<usize> {
        self.n2
    }

    pub fn probit_fits(&self) -> &[ProbitFit] {
        &self.probits
    }

    pub fn target_summary(&self) -> &MillsSummary {
        &self.target
    }

    pub fn partner_summary(&self) -> Option<&MillsSummary> {
        self.partner.as_ref()
    }

    fn check_gammas(&self, gamma1: f64, gamma2: f64) -> Result<()> {
        check_gamma(gamma1)?;
        check_gamma(gamma2)?;
        if self.mechanism != Mechanism::C && gamma2 != 0.0 {
            return Err(Error::Domain(format!("γ₂ = {gamma2} given, but mechanism {} has a single γ", self.mechanism)));
        }
        Ok(())
    }

    /// Corrected components at (γ₁, γ₂); variances are NaN when their
    /// denominator is unusable.
    fn components(&self, gamma1: f64, gamma2: f64) -> (f64, f64, f64, f64, f64) {
        let d1 = self.target.denominator(gamma1, self.df_target);
        let sigma1_sq = sigma_sq_from(self.sigma1_sq_ols, d1).unwrap_or(f64::NAN);
        let (d2, sigma2_sq) = match &self.partner {
            Some(summary) => {
                let d2 = summary.denominator(gamma2, self.df_partner);
                (d2, sigma_sq_from(self.sigma2_sq_ols, d2).unwrap_or(f64::NAN))
            }
            None => (f64::NAN, self.sigma2_sq_ols),
        };
        let beta2 = beta2_from(self.beta2_ols, gamma1, sigma1_sq.sqrt(), self.target.partner_coef);
        (d1, d2, sigma1_sq, sigma2_sq, beta2)
    }

    pub fn regularity_inputs(&self, gamma1: f64, gamma2: f64) -> RegularityInputs {
        let (d1, d2, sigma1_sq, sigma2_sq, beta2) = self.components(gamma1, gamma2);
        RegularityInputs {
            mechanism: self.mechanism,
            gamma1,
            gamma2,
            rcond_target_design: self.rcond_target,
            rcond_adjuster_design: self.rcond_adjuster,
            sigma1_sq_ols: self.sigma1_sq_ols,
            sigma2_sq_ols: self.sigma2_sq_ols,
            target_denominator: d1,
            partner_denominator: d2,
            beta2,
            sigma1_sq,
            sigma2_sq,
        }
    }

    pub fn regularity(&self, gamma1: f64, gamma2: f64) -> RegularityReport {
        self.regularity_inputs(gamma1, gamma2).report()
    }

    /// Corrected estimates at (γ₁, γ₂). Order of evaluation: σ̂²₁ correction,
    /// then the β̂₂ correction (which uses the corrected σ̂₁), then ŝe.
    pub fn estimate(&self, gamma1: f64, gamma2: f64) -> Result<CorrectedEstimates> {
        self.check_gammas(gamma1, gamma2)?;
        let report = self.regularity(gamma1, gamma2);
        if !report.all_passed() {
            return Err(Error::Regularity(Box::new(report)));
        }
        let (_, _, sigma1_sq_hat, sigma2_sq_hat, beta2_hat) = self.components(gamma1, gamma2);
        let rho_hat = rho_from_components(beta2_hat, sigma1_sq_hat, sigma2_sq_hat)?;
        let se_hat =
            standard_error_from(sigma1_sq_hat, gamma1, &self.target, self.xtx_inv_22, beta2_hat, sigma2_sq_hat)?;
        Ok(CorrectedEstimates {
            mechanism: self.mechanism,
            gamma1,
            gamma2,
            beta2_hat,
            sigma1_sq_hat,
            sigma2_sq_hat,
            rho_hat,
            se_hat,
            n_rows: self.n_rows,
            n_complete: self.n_complete,
            n2: self.n2,
            beta2_ols: self.beta2_ols,
            sigma1_sq_ols: self.sigma1_sq_ols,
            sigma2_sq_ols: self.sigma2_sq_ols,
            probit_fits: Arc::clone(&self.probits),
        })
    }
}

/// Corrected estimates under mechanism A (only the target is missing).
pub fn estimate_mdm_a(dataset: &Dataset, gamma: f64) -> Result<CorrectedEstimates> {
    check_gamma(gamma)?;
    PreparedEstimator::new(dataset, Mechanism::A)?.estimate(gamma, 0.0)
}

/// Corrected estimates under mechanism B (target and partner missing together).
pub fn estimate_mdm_b(dataset: &Dataset, gamma: f64) -> Result<CorrectedEstimates> {
    check_gamma(gamma)?;
    PreparedEstimator::new(dataset, Mechanism::B)?.estimate(gamma, 0.0)
}

/// Corrected estimates under mechanism C (separate selection for target and partner).
pub fn estimate_mdm_c(dataset: &Dataset, gamma1: f64, gamma2: f64) -> Result<CorrectedEstimates> {
    check_gamma(gamma1)?;
    check_gamma(gamma2)?;
    PreparedEstimator::new(dataset, Mechanism::C)?.estimate(gamma1, gamma2)
}

/// Dispatches to the estimator for `mechanism`.
pub fn estimate(dataset: &Dataset, mechanism: Mechanism, gamma1: f64, gamma2: f64) -> Result<CorrectedEstimates> {
    match mechanism {
        Mechanism::A => estimate_mdm_a(dataset, gamma1),
        Mechanism::B => estimate_mdm_b(dataset, gamma1),
        Mechanism::C => estimate_mdm_c(dataset, gamma1, gamma2),
    }
}

/// Regularity inputs for a dataset, tolerating failures of the fits: when
/// preparation breaks down only the design conditioning is evaluated.
pub(crate) fn regularity_inputs(dataset: &Dataset, mechanism: Mechanism, gamma1: f64, gamma2: f64) -> RegularityInputs {
    if let Ok(prepared) = PreparedEstimator::new(dataset, mechanism) {
        return prepared.regularity_inputs(gamma1, gamma2);
    }
    let complete = dataset.complete_rows();
    let adjuster_rows = match mechanism {
        Mechanism::A => dataset.all_rows(),
        Mechanism::B => complete.clone(),
        Mechanism::C => dataset.partner_rows(),
    };
    RegularityInputs {
        mechanism,
        gamma1,
        gamma2,
        rcond_target_design: gram_rcond(&dataset.target_design(&complete)),
        rcond_adjuster_design: gram_rcond(&dataset.adjuster_design(&adjuster_rows)),
        sigma1_sq_ols: f64::NAN,
        sigma2_sq_ols: f64::NAN,
        target_denominator: f64::NAN,
        partner_denominator: f64::NAN,
        beta2: f64::NAN,
        sigma1_sq: f64::NAN,
        sigma2_sq: f64::NAN,
    }
}
