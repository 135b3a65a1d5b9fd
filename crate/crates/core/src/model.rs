//! Shared data model: the dataset with its missingness mask and variable
//! roles, the missing-data mechanisms, sensitivity-parameter boxes, the
//! partial-correlation identity and the regularity report.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reciprocal condition number of `XᵀX` below which a design counts as singular.
pub const RCOND_THRESHOLD: f64 = 1e-10;
/// Smallest admissible magnitude of a variance-correction denominator.
pub const DENOMINATOR_THRESHOLD: f64 = 1e-8;

/// Partial correlation of target and partner given the adjusters, expressed
/// through the partner slope and the two residual variances.
pub fn rho_from_components(beta2: f64, sigma1_sq: f64, sigma2_sq: f64) -> Result<f64> {
    if !(sigma1_sq > 0.0 && sigma1_sq.is_finite()) || !(sigma2_sq > 0.0 && sigma2_sq.is_finite()) {
        return Err(Error::Domain(format!(
            "residual variances must be positive and finite (got {sigma1_sq}, {sigma2_sq})"
        )));
    }
    if !beta2.is_finite() {
        return Err(Error::Domain(format!("slope must be finite (got {beta2})")));
    }
    Ok(beta2 / (beta2 * beta2 + sigma1_sq / sigma2_sq).sqrt())
}

/// Missing-data mechanism.
///
/// * `A`: only the target is missing; selection depends on the partner and adjusters.
/// * `B`: target and partner are missing together; selection depends on the adjusters.
/// * `C`: target and partner have separate selection processes on the adjusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    A,
    B,
    C,
}

impl Mechanism {
    /// Number of sensitivity parameters the mechanism carries.
    pub fn gamma_dims(self) -> usize {
        match self {
            Mechanism::C => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mechanism::A => "A",
            Mechanism::B => "B",
            Mechanism::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Mechanism::A),
            "B" | "b" => Ok(Mechanism::B),
            "C" | "c" => Ok(Mechanism::C),
            other => Err(Error::Domain(format!("unknown mechanism '{other}' (expected A, B or C)"))),
        }
    }
}

/// Observed missingness layout of the target and partner columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPattern {
    /// Neither column has missing cells.
    Complete,
    /// Only the target has missing cells (compatible with A and C).
    TargetOnly,
    /// Only the partner has missing cells (compatible with C).
    PartnerOnly,
    /// Both have missing cells on exactly the same rows (compatible with B and C).
    Shared,
    /// Both have missing cells on different rows (compatible with C).
    Independent,
}

/// Column roles within a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub target: usize,
    pub partner: usize,
    pub adjusters: Vec<usize>,
}

/// Column-major numeric table with an explicit observation mask.
///
/// Missing cells are tracked only through the mask; their stored value is a
/// NaN placeholder that no estimator reads.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    values: Vec<Vec<f64>>,
    observed: Vec<Vec<bool>>,
    roles: Roles,
    n_rows: usize,
}

impl Dataset {
    /// Builds a dataset from optional cells (`None` = missing).
    pub fn new(names: Vec<String>, columns: Vec<Vec<Option<f64>>>, roles: Roles) -> Result<Self> {
        let observed = columns.iter().map(|c| c.iter().map(Option::is_some).collect()).collect();
        let values = columns.into_iter().map(|c| c.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect()).collect();
        Self::from_parts(names, values, observed, roles)
    }

    /// Builds a dataset from dense values and a separate mask.
    pub fn from_parts(
        names: Vec<String>,
        mut values: Vec<Vec<f64>>,
        observed: Vec<Vec<bool>>,
        roles: Roles,
    ) -> Result<Self> {
        let n_cols = values.len();
        if names.len() != n_cols || observed.len() != n_cols {
            return Err(Error::Domain(format!(
                "{} names, {} value columns and {} mask columns",
                names.len(),
                n_cols,
                observed.len()
            )));
        }
        let n_rows = values.first().map_or(0, Vec::len);
        for (j, (v, m)) in values.iter().zip(&observed).enumerate() {
            if v.len() != n_rows || m.len() != n_rows {
                return Err(Error::Domain(format!("column '{}' has inconsistent length", names[j])));
            }
        }

        let mut used = vec![roles.target, roles.partner];
        used.extend(&roles.adjusters);
        for &c in &used {
            if c >= n_cols {
                return Err(Error::Domain(format!("role refers to column {c}, dataset has {n_cols}")));
            }
        }
        let mut sorted = used.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != used.len() {
            return Err(Error::Domain("target, partner and adjuster roles must be disjoint".into()));
        }

        for &c in &used {
            for (i, (v, &o)) in values[c].iter_mut().zip(&observed[c]).enumerate() {
                if o && !v.is_finite() {
                    return Err(Error::Domain(format!("non-finite value in column '{}' at row {}", names[c], i + 1)));
                }
                if !o {
                    *v = f64::NAN;
                }
            }
        }

        let incomplete = (0..n_rows).filter(|&i| roles.adjusters.iter().any(|&c| !observed[c][i])).count();
        if incomplete > 0 {
            return Err(Error::Domain(format!(
                "{incomplete} rows have missing adjuster values; adjusters must be fully observed"
            )));
        }

        let p = 2 + roles.adjusters.len();
        if n_rows <= p {
            return Err(Error::InsufficientData { rows: n_rows, cols: p });
        }

        Ok(Self { names, values, observed, roles, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Number of analysis variables `p` (target, partner and adjusters).
    pub fn n_vars(&self) -> usize {
        2 + self.roles.adjusters.len()
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.values[c]
    }

    pub fn mask(&self, c: usize) -> &[bool] {
        &self.observed[c]
    }

    pub fn target(&self) -> &[f64] {
        &self.values[self.roles.target]
    }

    pub fn partner(&self) -> &[f64] {
        &self.values[self.roles.partner]
    }

    pub fn target_observed(&self) -> &[bool] {
        &self.observed[self.roles.target]
    }

    pub fn partner_observed(&self) -> &[bool] {
        &self.observed[self.roles.partner]
    }

    /// Rows where both the target and the partner are observed.
    pub fn complete_rows(&self) -> Vec<usize> {
        let (t, q) = (self.target_observed(), self.partner_observed());
        (0..self.n_rows).filter(|&i| t[i] && q[i]).collect()
    }

    /// Rows where the partner is observed.
    pub fn partner_rows(&self) -> Vec<usize> {
        let q = self.partner_observed();
        (0..self.n_rows).filter(|&i| q[i]).collect()
    }

    pub fn all_rows(&self) -> Vec<usize> {
        (0..self.n_rows).collect()
    }

    pub fn mask_pattern(&self) -> MaskPattern {
        let (t, q) = (self.target_observed(), self.partner_observed());
        let t_missing = t.iter().any(|o| !o);
        let q_missing = q.iter().any(|o| !o);
        match (t_missing, q_missing) {
            (false, false) => MaskPattern::Complete,
            (true, false) => MaskPattern::TargetOnly,
            (false, true) => MaskPattern::PartnerOnly,
            (true, true) if t == q => MaskPattern::Shared,
            (true, true) => MaskPattern::Independent,
        }
    }

    /// Checks that the mask layout is one the mechanism can have produced.
    pub fn check_mechanism(&self, mechanism: Mechanism) -> Result<()> {
        let fail =
            |reason: &str| Err(Error::Mechanism { mechanism: mechanism.to_string(), reason: reason.to_string() });
        match mechanism {
            Mechanism::A if self.partner_observed().iter().any(|o| !o) => {
                fail("partner column has missing cells; mechanism A requires it fully observed")
            }
            Mechanism::B if self.target_observed() != self.partner_observed() => {
                fail("target and partner must be missing on exactly the same rows")
            }
            _ => Ok(()),
        }
    }

    /// Design `(1, partner, adjusters…)` restricted to `rows`.
    pub fn target_design(&self, rows: &[usize]) -> DMatrix<f64> {
        let mut cols = vec![self.roles.partner];
        cols.extend(&self.roles.adjusters);
        self.design(rows, &cols)
    }

    /// Design `(1, adjusters…)` restricted to `rows`.
    pub fn adjuster_design(&self, rows: &[usize]) -> DMatrix<f64> {
        self.design(rows, &self.roles.adjusters)
    }

    fn design(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(
            rows.len(),
            cols.len() + 1,
            |i, j| {
                if j == 0 {
                    1.0
                } else {
                    self.values[cols[j - 1]][rows[i]]
                }
            },
        )
    }

    /// Values of column `c` on `rows`.
    pub fn gather(&self, c: usize, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&i| self.values[c][i]).collect()
    }
}

/// Box of admissible sensitivity parameters.
///
/// The second range is used only by mechanism C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBox {
    pub gamma1_min: f64,
    pub gamma1_max: f64,
    pub gamma2_min: f64,
    pub gamma2_max: f64,
}

impl GammaBox {
    pub fn new(gamma1: (f64, f64), gamma2: (f64, f64)) -> Result<Self> {
        for (lo, hi) in [gamma1, gamma2] {
            check_gamma(lo)?;
            check_gamma(hi)?;
            if lo > hi {
                return Err(Error::Domain(format!("γ range [{lo}, {hi}] has min > max")));
            }
        }
        Ok(Self { gamma1_min: gamma1.0, gamma1_max: gamma1.1, gamma2_min: gamma2.0, gamma2_max: gamma2.1 })
    }

    /// Box for a single sensitivity parameter (γ₂ fixed at 0).
    pub fn single(min: f64, max: f64) -> Result<Self> {
        Self::new((min, max), (0.0, 0.0))
    }

    pub fn point(gamma1: f64, gamma2: f64) -> Result<Self> {
        Self::new((gamma1, gamma1), (gamma2, gamma2))
    }

    pub fn contains(&self, gamma1: f64, gamma2: f64) -> bool {
        (self.gamma1_min..=self.gamma1_max).contains(&gamma1) && (self.gamma2_min..=self.gamma2_max).contains(&gamma2)
    }
}

/// Sensitivity parameters are correlations and must lie in [−1, 1].
pub fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && (-1.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::Domain(format!("γ = {gamma} is outside [-1, 1]")))
    }
}

/// One regularity condition with its numeric diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub assumption: u8,
    pub name: String,
    pub passed: bool,
    /// Diagnostic magnitude; NaN when the check could not be evaluated.
    pub magnitude: f64,
    pub threshold: f64,
}

/// Runtime check of the conditions under which the corrected estimators
/// are consistent. Five entries for mechanisms A/B, six for C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub mechanism: Mechanism,
    pub gamma1: f64,
    pub gamma2: f64,
    pub checks: Vec<AssumptionCheck>,
}

impl RegularityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, assumption: u8) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.assumption == assumption)
    }

    pub fn summary(&self) -> String {
        let failed: Vec<String> =
            self.failures().map(|c| format!("#{} {} (magnitude {:.3e})", c.assumption, c.name, c.magnitude)).collect();
        if failed.is_empty() {
            "all checks passed".into()
        } else {
            failed.join("; ")
        }
    }
}

/// Fitted quantities the regularity conditions are evaluated on. Fields
/// that could not be computed (upstream failure) are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityInputs {
    pub mechanism: Mechanism,
    pub gamma1: f64,
    pub gamma2: f64,
    pub rcond_target_design: f64,
    pub rcond_adjuster_design: f64,
    pub sigma1_sq_ols: f64,
    pub sigma2_sq_ols: f64,
    pub target_denominator: f64,
    /// Only used by mechanism C.
    pub partner_denominator: f64,
    pub beta2: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
}

impl RegularityInputs {
    pub fn report(&self) -> RegularityReport {
        let mut checks = Vec::with_capacity(6);
        let min_var = self.sigma1_sq_ols.min(self.sigma2_sq_ols);
        checks.push(AssumptionCheck {
            assumption: 1,
            name: "positive_residual_variances".into(),
            passed: min_var > 0.0 && self.sigma1_sq_ols.is_finite() && self.sigma2_sq_ols.is_finite(),
            magnitude: min_var,
            threshold: 0.0,
        });
        checks.push(AssumptionCheck {
            assumption: 2,
            name: "target_design_nonsingular".into(),
            passed: self.rcond_target_design >= RCOND_THRESHOLD,
            magnitude: self.rcond_target_design,
            threshold: RCOND_THRESHOLD,
        });
        checks.push(AssumptionCheck {
            assumption: 3,
            name: "adjuster_design_nonsingular".into(),
            passed: self.rcond_adjuster_design >= RCOND_THRESHOLD,
            magnitude: self.rcond_adjuster_design,
            threshold: RCOND_THRESHOLD,
        });
        checks.push(AssumptionCheck {
            assumption: 4,
            name: "target_correction_denominator".into(),
            passed: self.target_denominator.abs() >= DENOMINATOR_THRESHOLD,
            magnitude: self.target_denominator,
            threshold: DENOMINATOR_THRESHOLD,
        });
        let mut next = 5;
        if self.mechanism == Mechanism::C {
            checks.push(AssumptionCheck {
                assumption: 5,
                name: "partner_correction_denominator".into(),
                passed: self.partner_denominator.abs() >= DENOMINATOR_THRESHOLD,
                magnitude: self.partner_denominator,
                threshold: DENOMINATOR_THRESHOLD,
            });
            next = 6;
        }
        let ratio_denominator = self.beta2 * self.beta2 + self.sigma1_sq / self.sigma2_sq;
        let identified = self.sigma2_sq > 0.0
            && self.sigma1_sq >= 0.0
            && !(self.beta2 == 0.0 && self.sigma1_sq == 0.0)
            && ratio_denominator.is_finite()
            && ratio_denominator > 0.0;
        checks.push(AssumptionCheck {
            assumption: next,
            name: "correlation_denominator_positive".into(),
            passed: identified,
            magnitude: ratio_denominator,
            threshold: 0.0,
        });
        RegularityReport { mechanism: self.mechanism, gamma1: self.gamma1, gamma2: self.gamma2, checks }
    }
}

/// Evaluates the regularity conditions for `dataset` under `mechanism` at
/// the given sensitivity parameters. Never fails: conditions that cannot be
/// evaluated because an upstream fit broke down are reported as failed.
pub fn validate_regularity(dataset: &Dataset, mechanism: Mechanism, gamma1: f64, gamma2: f64) -> RegularityReport {
    crate::estimators::regularity_inputs(dataset, mechanism, gamma1, gamma2).report()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles() -> Roles {
        Roles { target: 0, partner: 1, adjusters: vec![2] }
    }

    fn names() -> Vec<String> {
        ["x1", "x2", "x3"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho_from_components(0.0, 1.0, 1.0).unwrap(), 0.0);
        let r = rho_from_components(1.0, 1.0, 1.0).unwrap();
        assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let r = rho_from_components(0.01, 0.028 * 0.028, 1.16).unwrap();
        assert_eq!((r * 1000.0).round() / 1000.0, 0.359);
    }

    #[test]
    fn rho_rejects_nonpositive_variance() {
        assert!(matches!(rho_from_components(0.1, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(rho_from_components(0.1, 1.0, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn missing_adjuster_rows_are_counted() {
        let cols = vec![
            vec![Some(1.0), Some(2.0), None, Some(4.0), Some(1.0)],
            vec![Some(1.0), Some(0.0), Some(3.0), Some(1.0), Some(2.0)],
            vec![Some(1.0), None, Some(2.0), None, Some(5.0)],
        ];
        let err = Dataset::new(names(), cols, roles()).unwrap_err();
        assert!(err.to_string().contains("2 rows"), "{err}");
    }

    #[test]
    fn overlapping_roles_rejected() {
        let cols = vec![vec![Some(1.0); 6], vec![Some(2.0); 6], vec![Some(3.0); 6]];
        let r = Roles { target: 0, partner: 0, adjusters: vec![2] };
        assert!(Dataset::new(names(), cols, r).is_err());
    }

    #[test]
    fn mask_patterns_and_mechanism_checks() {
        let t = vec![Some(1.0), None, Some(3.0), Some(4.0), None, Some(2.0)];
        let full = vec![Some(1.0); 6];
        let adj: Vec<Option<f64>> = (0..6).map(|i| Some(i as f64)).collect();

        let a = Dataset::new(names(), vec![t.clone(), full.clone(), adj.clone()], roles()).unwrap();
        assert_eq!(a.mask_pattern(), MaskPattern::TargetOnly);
        assert!(a.check_mechanism(Mechanism::A).is_ok());
        assert!(matches!(a.check_mechanism(Mechanism::B), Err(Error::Mechanism { .. })));
        assert!(a.check_mechanism(Mechanism::C).is_ok());

        let b = Dataset::new(names(), vec![t.clone(), t.clone(), adj.clone()], roles()).unwrap();
        assert_eq!(b.mask_pattern(), MaskPattern::Shared);
        assert!(b.check_mechanism(Mechanism::A).is_err());
        assert!(b.check_mechanism(Mechanism::B).is_ok());

        let q = vec![None, Some(1.0), Some(3.0), None, Some(4.0), Some(2.0)];
        let c = Dataset::new(names(), vec![t, q, adj], roles()).unwrap();
        assert_eq!(c.mask_pattern(), MaskPattern::Independent);
        assert!(c.check_mechanism(Mechanism::C).is_ok());
        assert_eq!(c.complete_rows(), vec![2, 5]);
        assert_eq!(c.partner_rows(), vec![1, 2, 4, 5]);
    }

    #[test]
    fn designs_put_partner_second() {
        let cols = vec![
            vec![Some(9.0); 5],
            (0..5).map(|i| Some(10.0 + i as f64)).collect(),
            (0..5).map(|i| Some(20.0 + i as f64)).collect(),
        ];
        let d = Dataset::new(names(), cols, roles()).unwrap();
        let x = d.target_design(&[1, 3]);
        assert_eq!(x.shape(), (2, 3));
        assert_eq!(x[(0, 0)], 1.0);
        assert_eq!(x[(0, 1)], 11.0);
        assert_eq!(x[(1, 2)], 23.0);
        let w = d.adjuster_design(&[4]);
        assert_eq!(w.shape(), (1, 2));
        assert_eq!(w[(0, 1)], 24.0);
    }

    #[test]
    fn gamma_box_validation() {
        assert!(GammaBox::single(0.0, 0.5).is_ok());
        assert!(GammaBox::single(0.6, 0.5).is_err());
        assert!(GammaBox::single(0.0, 1.2).is_err());
        assert!(GammaBox::new((0.0, 0.5), (-1.5, 0.0)).is_err());
        assert!(check_gamma(f64::NAN).is_err());
    }

    #[test]
    fn report_has_five_or_six_entries() {
        let inputs = RegularityInputs {
            mechanism: Mechanism::A,
            gamma1: 0.1,
            gamma2: 0.0,
            rcond_target_design: 1e-3,
            rcond_adjuster_design: 1e-2,
            sigma1_sq_ols: 1.0,
            sigma2_sq_ols: 2.0,
            target_denominator: 0.9,
            partner_denominator: f64::NAN,
            beta2: 0.3,
            sigma1_sq: 1.1,
            sigma2_sq: 2.0,
        };
        let a = inputs.report();
        assert_eq!(a.checks.len(), 5);
        assert!(a.all_passed());
        let c = RegularityInputs { mechanism: Mechanism::C, partner_denominator: 1e-9, ..inputs }.report();
        assert_eq!(c.checks.len(), 6);
        assert!(!c.all_passed());
        assert_eq!(c.failures().next().unwrap().assumption, 5);
    }
}
