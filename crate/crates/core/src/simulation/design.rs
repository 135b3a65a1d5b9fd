//! Data-generating process for the coverage experiments.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_gamma, rho_from_components, Dataset, Mechanism, Roles};

/// Distribution of the two adjusting covariates, drawn jointly per row.
pub trait CovariateModel: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;

    /// Draws `(age, hypertension)` for one row.
    fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64);
}

/// Age ~ Normal(66, 8²) truncated to [55, 85]; hypertension ~ Bernoulli(0.4), independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OlderAdultCovariates {
    pub age_mean: f64,
    pub age_sd: f64,
    pub age_min: f64,
    pub age_max: f64,
    pub hypertension_rate: f64,
}

impl Default for OlderAdultCovariates {
    fn default() -> Self {
        Self { age_mean: 66.0, age_sd: 8.0, age_min: 55.0, age_max: 85.0, hypertension_rate: 0.4 }
    }
}

impl CovariateModel for OlderAdultCovariates {
    fn name(&self) -> &str {
        "older-adult"
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let age = loop {
            let z: f64 = rng.sample(StandardNormal);
            let a = self.age_mean + self.age_sd * z;
            if (self.age_min..=self.age_max).contains(&a) {
                break a;
            }
        };
        let hypertension = if rng.random::<f64>() < self.hypertension_rate { 1.0 } else { 0.0 };
        (age, hypertension)
    }
}

/// Regression and selection coefficients of the generator.
///
/// Linear predictors are written over `(1, age, hypertension)` for the
/// partner and the adjuster-only selection equations, and over
/// `(1, partner, age, hypertension)` for the target and the mechanism A
/// selection equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficients {
    pub partner: [f64; 3],
    /// Standard deviation of the partner error ξ₂.
    pub partner_sd: f64,
    pub target: [f64; 4],
    /// Standard deviation of the target error.
    pub target_sd: f64,
    /// Selection of the target under mechanism A.
    pub selection_a: [f64; 4],
    /// Selection of the target under mechanisms B and C.
    pub selection_adjusters: [f64; 3],
    /// Selection of the partner under mechanism C.
    pub partner_selection: [f64; 3],
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            partner: [2.313, -0.042, -0.216],
            partner_sd: 1.16f64.sqrt(),
            target: [1.092, 0.01, -0.002, -0.006],
            target_sd: 0.028,
            selection_a: [2.708, 0.548, -0.036, -0.042],
            selection_adjusters: [3.9755, -0.059, -0.160],
            partner_selection: [3.2, -0.045, -0.1],
        }
    }
}

/// Full specification of a simulated study.
#[derive(Debug, Clone)]
pub struct SimulationDesign {
    pub n: usize,
    pub mechanism: Mechanism,
    /// Correlation of the target error with the target selection error.
    pub gamma0: f64,
    /// Correlation of the partner error with the partner selection error (mechanism C).
    pub gamma20: f64,
    pub coefficients: Coefficients,
    pub covariates: Arc<dyn CovariateModel>,
    pub seed: u64,
}

impl SimulationDesign {
    pub fn new(n: usize, mechanism: Mechanism, gamma0: f64, seed: u64) -> Self {
        Self {
            n,
            mechanism,
            gamma0,
            gamma20: 0.0,
            coefficients: Coefficients::default(),
            covariates: Arc::new(OlderAdultCovariates::default()),
            seed,
        }
    }

    pub fn with_gamma20(mut self, gamma20: f64) -> Self {
        self.gamma20 = gamma20;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma0)?;
        check_gamma(self.gamma20)?;
        if self.mechanism != Mechanism::C && self.gamma20 != 0.0 {
            return Err(Error::Domain(format!("γ₂₀ = {} requires mechanism C", self.gamma20)));
        }
        let c = &self.coefficients;
        if c.target_sd.is_nan() || c.target_sd <= 0.0 || c.partner_sd.is_nan() || c.partner_sd <= 0.0 {
            return Err(Error::Domain(format!(
                "error standard deviations must be positive (target {}, partner {})",
                c.target_sd, c.partner_sd
            )));
        }
        if self.n < 5 {
            return Err(Error::Domain(format!("sample size {} is too small", self.n)));
        }
        Ok(())
    }
}

/// Partial correlation of target and partner given the covariates implied
/// by the design coefficients.
pub fn true_rho(design: &SimulationDesign) -> Result<f64> {
    let c = &design.coefficients;
    if c.target_sd.is_nan() || c.target_sd <= 0.0 {
        return Err(Error::Domain(format!("target error sd {} must be positive", c.target_sd)));
    }
    rho_from_components(c.target[1], c.target_sd * c.target_sd, c.partner_sd * c.partner_sd)
}

/// Generated sample before masking, with the selection indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSample {
    pub target: Vec<f64>,
    pub partner: Vec<f64>,
    pub age: Vec<f64>,
    pub hypertension: Vec<f64>,
    pub target_observed: Vec<bool>,
    pub partner_observed: Vec<bool>,
}

pub const COLUMN_NAMES: [&str; 4] = ["x1", "x2", "age", "hypertension"];

impl SimulatedSample {
    pub fn missing_fraction(&self) -> f64 {
        self.target_observed.iter().filter(|&&o| !o).count() as f64 / self.target.len() as f64
    }

    /// Masked dataset with roles target = x1, partner = x2, adjusters = (age, hypertension).
    pub fn to_dataset(&self) -> Result<Dataset> {
        let mask = |v: &[f64], obs: &[bool]| -> Vec<Option<f64>> {
            v.iter().zip(obs).map(|(&x, &o)| o.then_some(x)).collect()
        };
        let all = vec![true; self.target.len()];
        let columns = vec![
            mask(&self.target, &self.target_observed),
            mask(&self.partner, &self.partner_observed),
            mask(&self.age, &all),
            mask(&self.hypertension, &all),
        ];
        Dataset::new(
            COLUMN_NAMES.iter().map(|s| s.to_string()).collect(),
            columns,
            Roles { target: 0, partner: 1, adjusters: vec![2, 3] },
        )
    }
}

fn dot3(b: &[f64; 3], age: f64, hyp: f64) -> f64 {
    b[0] + b[1] * age + b[2] * hyp
}

/// Random stream for `replicate`; streams are independent of one another
/// and of the order in which they are consumed.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Draws replicate `replicate` of the design.
pub fn simulate_sample(design: &SimulationDesign, replicate: u64) -> Result<SimulatedSample> {
    design.validate()?;
    let c = &design.coefficients;
    let mut rng = replicate_rng(design.seed, replicate);
    let n = design.n;
    let g1 = design.gamma0;
    let g2 = design.gamma20;
    let eps_sd = c.target_sd * (1.0 - g1 * g1).sqrt();
    let eps2_sd = c.partner_sd * (1.0 - g2 * g2).sqrt();
    let mut s = SimulatedSample {
        target: Vec::with_capacity(n),
        partner: Vec::with_capacity(n),
        age: Vec::with_capacity(n),
        hypertension: Vec::with_capacity(n),
        target_observed: Vec::with_capacity(n),
        partner_observed: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let (age, hyp) = design.covariates.draw(&mut rng);
        let xi: f64 = rng.sample(StandardNormal);
        let eps: f64 = rng.sample(StandardNormal);
        let eta1: f64 = rng.sample(StandardNormal);
        let eta2: f64 = rng.sample(StandardNormal);

        let xi2 =
            if design.mechanism == Mechanism::C { g2 * c.partner_sd * eta2 + eps2_sd * xi } else { c.partner_sd * xi };
        let x2 = dot3(&c.partner, age, hyp) + xi2;
        let x1 = c.target[0]
            + c.target[1] * x2
            + c.target[2] * age
            + c.target[3] * hyp
            + c.target_sd * g1 * eta1
            + eps_sd * eps;

        let (z1, z2) = match design.mechanism {
            Mechanism::A => {
                let b = &c.selection_a;
                let z = b[0] + b[1] * x2 + b[2] * age + b[3] * hyp + eta1 > 0.0;
                (z, true)
            }
            Mechanism::B => {
                let z = dot3(&c.selection_adjusters, age, hyp) + eta1 > 0.0;
                (z, z)
            }
            Mechanism::C => {
                (dot3(&c.selection_adjusters, age, hyp) + eta1 > 0.0, dot3(&c.partner_selection, age, hyp) + eta2 > 0.0)
            }
        };

        s.target.push(x1);
        s.partner.push(x2);
        s.age.push(age);
        s.hypertension.push(hyp);
        s.target_observed.push(z1);
        s.partner_observed.push(z2);
    }
    Ok(s)
}

/// Masked dataset for the design's first replicate.
pub fn generate_dataset(design: &SimulationDesign) -> Result<Dataset> {
    simulate_sample(design, 0)?.to_dataset()
}
