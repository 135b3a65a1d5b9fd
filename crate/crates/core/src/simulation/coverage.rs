//! Monte Carlo coverage and width of complete-case, oracle and
//! uncertainty-region intervals.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::PreparedEstimator;
use crate::exec::Execution;
use crate::inference::{confidence_interval, region_from_prepared};
use crate::model::{GammaBox, Mechanism};

use super::design::{simulate_sample, true_rho, SimulationDesign};

/// Largest share of failed replicates tolerated by an experiment (exclusive).
pub const MAX_FAILED_REPLICATES: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Interval at γ = 0.
    CompleteCase,
    /// Interval at the true γ.
    Oracle,
    UncertaintyRegion,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::CompleteCase, Method::Oracle, Method::UncertaintyRegion];

    pub fn label(self) -> &'static str {
        match self {
            Method::CompleteCase => "cc",
            Method::Oracle => "oracle",
            Method::UncertaintyRegion => "ur",
        }
    }
}

/// One interval from one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalRecord {
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
}

impl IntervalRecord {
    fn new(lower: f64, upper: f64, truth: f64) -> Self {
        Self { lower, upper, covered: lower <= truth && truth <= upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: u64,
    pub n_complete: usize,
    pub rho_cc: f64,
    pub rho_oracle: f64,
    pub se_oracle: f64,
    /// `(ρ̂ − ρ) / ŝe` at the true γ.
    pub studentized: f64,
    pub cc: IntervalRecord,
    pub oracle: IntervalRecord,
    pub ur: IntervalRecord,
}

impl ReplicateRecord {
    pub fn interval(&self, method: Method) -> &IntervalRecord {
        match method {
            Method::CompleteCase => &self.cc,
            Method::Oracle => &self.oracle,
            Method::UncertaintyRegion => &self.ur,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedReplicate {
    pub replicate: u64,
    pub reason: String,
}

/// Quartiles plus extremes of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile (R type 7) of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

impl Quartiles {
    pub fn of(values: Vec<f64>) -> Self {
        let s = sorted(values);
        Self {
            min: quantile_sorted(&s, 0.0),
            q1: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q3: quantile_sorted(&s, 0.75),
            max: quantile_sorted(&s, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub replicates: usize,
    pub covered_count: usize,
    pub empirical_coverage: f64,
    pub width: Quartiles,
}

/// Settings recorded alongside the results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSettings {
    pub n: usize,
    pub mechanism: Mechanism,
    pub gamma0: f64,
    pub gamma20: f64,
    pub seed: u64,
    pub covariates: String,
    pub replicates: usize,
    pub alpha: f64,
    pub ur_box: GammaBox,
    pub grid_points: usize,
    pub true_rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub settings: ExperimentSettings,
    pub methods: Vec<MethodSummary>,
    /// Empirical 2.5% and 97.5% quantiles of the studentized oracle statistic.
    pub studentized_quantiles: (f64, f64),
    pub failed: Vec<FailedReplicate>,
    pub records: Vec<ReplicateRecord>,
}

impl CoverageReport {
    pub fn method(&self, method: Method) -> &MethodSummary {
        self.methods.iter().find(|m| m.method == method).expect("all methods are summarized")
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// One row per replicate and method.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["replicate", "method", "lower", "upper", "width", "covered", "rho_hat", "se_hat"])?;
        for r in &self.records {
            for m in Method::ALL {
                let i = r.interval(m);
                let (rho, se) = match m {
                    Method::CompleteCase => (r.rho_cc.to_string(), String::new()),
                    Method::Oracle => (r.rho_oracle.to_string(), r.se_oracle.to_string()),
                    Method::UncertaintyRegion => (String::new(), String::new()),
                };
                w.write_record([
                    r.replicate.to_string(),
                    m.label().to_string(),
                    i.lower.to_string(),
                    i.upper.to_string(),
                    i.width().to_string(),
                    i.covered.to_string(),
                    rho,
                    se,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `method: coverage (covered/replicates), median width` for each method.
    pub fn summary_lines(&self) -> Vec<String> {
        self.methods
            .iter()
            .map(|m| {
                format!(
                    "{}: coverage {:.3} ({}/{}), median width {:.4}",
                    m.method.label(),
                    m.empirical_coverage,
                    m.covered_count,
                    m.replicates,
                    m.width.median
                )
            })
            .collect()
    }
}

fn run_replicate(
    design: &SimulationDesign,
    replicate: u64,
    truth: f64,
    alpha: f64,
    ur_box: &GammaBox,
    grid_points: usize,
) -> Result<ReplicateRecord> {
    let dataset = simulate_sample(design, replicate)?.to_dataset()?;
    let prepared = PreparedEstimator::new(&dataset, design.mechanism)?;
    let cc = prepared.estimate(0.0, 0.0)?;
    let cc_ci = confidence_interval(&cc, alpha)?;
    let oracle = prepared.estimate(design.gamma0, design.gamma20)?;
    let oracle_ci = confidence_interval(&oracle, alpha)?;
    let ur = region_from_prepared(&prepared, ur_box, alpha, grid_points, Execution::Sequential)?;
    Ok(ReplicateRecord {
        replicate,
        n_complete: prepared.n_complete(),
        rho_cc: cc.rho_hat,
        rho_oracle: oracle.rho_hat,
        se_oracle: oracle.se_hat,
        studentized: (oracle.rho_hat - truth) / oracle.se_hat,
        cc: IntervalRecord::new(cc_ci.lower, cc_ci.upper, truth),
        oracle: IntervalRecord::new(oracle_ci.lower, oracle_ci.upper, truth),
        ur: IntervalRecord::new(ur.lower, ur.upper, truth),
    })
}

/// Runs `replicates` independent replicates of `design` with the default
/// execution strategy.
pub fn run_coverage_experiment(
    design: &SimulationDesign,
    replicates: usize,
    alpha: f64,
    ur_box: &GammaBox,
    grid_points: usize,
) -> Result<CoverageReport> {
    run_coverage_experiment_with(design, replicates, alpha, ur_box, grid_points, Execution::default())
}

/// As [`run_coverage_experiment`] with an explicit execution strategy. The
/// report does not depend on `exec`.
pub fn run_coverage_experiment_with(
    design: &SimulationDesign,
    replicates: usize,
    alpha: f64,
    ur_box: &GammaBox,
    grid_points: usize,
    exec: Execution,
) -> Result<CoverageReport> {
    if replicates == 0 {
        return Err(Error::Domain("at least one replicate is required".into()));
    }
    design.validate()?;
    crate::inference::critical_value(alpha)?;
    let truth = true_rho(design)?;

    let outcomes = exec.map_indexed(replicates, |r| run_replicate(design, r as u64, truth, alpha, ur_box, grid_points));

    let mut records = Vec::with_capacity(replicates);
    let mut failed = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(rec) => records.push(rec),
            Err(e) => failed.push(FailedReplicate { replicate: r as u64, reason: e.to_string() }),
        }
    }
    if !failed.is_empty() && failed.len() as f64 >= MAX_FAILED_REPLICATES * replicates as f64 {
        return Err(Error::Experiment { failed: failed.len(), replicates });
    }

    let methods = Method::ALL
        .iter()
        .map(|&method| {
            let covered_count = records.iter().filter(|r| r.interval(method).covered).count();
            MethodSummary {
                method,
                replicates: records.len(),
                covered_count,
                empirical_coverage: covered_count as f64 / records.len() as f64,
                width: Quartiles::of(records.iter().map(|r| r.interval(method).width()).collect()),
            }
        })
        .collect();
    let stats = sorted(records.iter().map(|r| r.studentized).collect());

    Ok(CoverageReport {
        settings: ExperimentSettings {
            n: design.n,
            mechanism: design.mechanism,
            gamma0: design.gamma0,
            gamma20: design.gamma20,
            seed: design.seed,
            covariates: design.covariates.name().to_string(),
            replicates,
            alpha,
            ur_box: *ur_box,
            grid_points,
            true_rho: truth,
        },
        methods,
        studentized_quantiles: (quantile_sorted(&stats, 0.025), quantile_sorted(&stats, 0.975)),
        failed,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert!((quantile_sorted(&s, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&s, 0.25) - 1.75).abs() < 1e-15);
        assert!(quantile_sorted(&[], 0.5).is_nan());
    }

    #[test]
    fn zero_replicates_rejected() {
        let d = SimulationDesign::new(100, Mechanism::A, 0.5, 1);
        let b = GammaBox::single(0.0, 0.5).unwrap();
        assert!(run_coverage_experiment(&d, 0, 0.05, &b, 11).is_err());
    }

    #[test]
    fn small_experiment_is_consistent() {
        let d = SimulationDesign::new(250, Mechanism::A, 0.5, 3);
        let b = GammaBox::single(0.0, 0.5).unwrap();
        let rep = run_coverage_experiment(&d, 20, 0.05, &b, 11).unwrap();
        for m in &rep.methods {
            assert!(m.covered_count <= m.replicates);
            assert_eq!(m.empirical_coverage, m.covered_count as f64 / m.replicates as f64);
        }
        for r in &rep.records {
            assert!(r.ur.lower <= r.oracle.lower + 1e-15 && r.ur.upper >= r.oracle.upper - 1e-15);
            assert!(r.ur.lower <= r.cc.lower && r.ur.upper >= r.cc.upper);
        }
        let mut csv = Vec::new();
        rep.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 3 * rep.records.len());
    }
}
