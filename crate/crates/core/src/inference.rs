//! Per-γ confidence intervals and their union over a γ box.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::{CorrectedEstimates, PreparedEstimator};
use crate::exec::Execution;
use crate::model::{Dataset, GammaBox, Mechanism};

/// Share of grid points allowed to fail before a region is rejected.
pub const MAX_FAILED_FRACTION: f64 = 0.10;

/// Two-sided standard normal critical value `Φ⁻¹(1 − α/2)`.
pub fn critical_value(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("α = {alpha} must lie in (0, 1)")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(1.0 - alpha / 2.0))
}

/// Closed interval for ρ at one γ point. Endpoints are never clipped to [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha: f64,
    /// Set when an endpoint lies outside [−1, 1].
    pub exceeds_unit_range: bool,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// `[ρ̂ − c ŝe, ρ̂ + c ŝe]` with `c = Φ⁻¹(1 − α/2)`.
pub fn confidence_interval(est: &CorrectedEstimates, alpha: f64) -> Result<Interval> {
    let c = critical_value(alpha)?;
    let half = c * est.se_hat;
    let lower = est.rho_hat - half;
    let upper = est.rho_hat + half;
    Ok(Interval {
        lower,
        upper,
        gamma1: est.gamma1,
        gamma2: est.gamma2,
        alpha,
        exceeds_unit_range: lower < -1.0 || upper > 1.0,
    })
}

/// Outcome of one grid evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub gamma1: f64,
    pub gamma2: f64,
    pub rho_hat: Option<f64>,
    pub interval: Option<Interval>,
    /// `"ok"` or the reason the point was skipped.
    pub status: String,
}

impl GridPoint {
    pub fn is_ok(&self) -> bool {
        self.interval.is_some()
    }
}

/// Union of confidence intervals over a γ box, reported as its hull plus
/// the per-γ trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintyRegion {
    pub lower: f64,
    pub upper: f64,
    pub gamma_box: GammaBox,
    pub alpha: f64,
    pub mechanism: Mechanism,
    /// γ point whose interval attains `lower`.
    pub argmin: (f64, f64),
    /// γ point whose interval attains `upper`.
    pub argmax: (f64, f64),
    pub failed: usize,
    pub grid: Vec<GridPoint>,
}

/// Flat trace row for plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub gamma: f64,
    pub gamma2: f64,
    pub rho_hat: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub status: String,
}

impl UncertaintyRegion {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn trace(&self) -> Vec<TraceRow> {
        self.grid
            .iter()
            .map(|g| TraceRow {
                gamma: g.gamma1,
                gamma2: g.gamma2,
                rho_hat: g.rho_hat,
                lower: g.interval.map(|i| i.lower),
                upper: g.interval.map(|i| i.upper),
                status: g.status.clone(),
            })
            .collect()
    }
}

/// Inclusive uniform grid on `[min, max]`; a degenerate range yields one point.
pub fn gamma_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::Domain(format!("grid needs at least 2 points per dimension, got {points}")));
    }
    if min == max {
        return Ok(vec![min]);
    }
    let step = (max - min) / (points - 1) as f64;
    Ok((0..points).map(|i| if i + 1 == points { max } else { min + step * i as f64 }).collect())
}

/// Uncertainty region for `dataset` under `mechanism`.
pub fn uncertainty_region(
    dataset: &Dataset,
    mechanism: Mechanism,
    gamma_box: &GammaBox,
    alpha: f64,
    grid_points: usize,
) -> Result<UncertaintyRegion> {
    let prepared = PreparedEstimator::new(dataset, mechanism)?;
    region_from_prepared(&prepared, gamma_box, alpha, grid_points, Execution::default())
}

/// Uncertainty region from an already prepared estimator.
///
/// For mechanisms A and B the γ₂ range of the box is ignored. Points are
/// evaluated independently and merged in grid order, so the result does not
/// depend on the execution strategy.
pub fn region_from_prepared(
    prepared: &PreparedEstimator,
    gamma_box: &GammaBox,
    alpha: f64,
    grid_points: usize,
    exec: Execution,
) -> Result<UncertaintyRegion> {
    critical_value(alpha)?;
    let mechanism = prepared.mechanism();
    let g1 = gamma_grid(gamma_box.gamma1_min, gamma_box.gamma1_max, grid_points)?;
    let g2 = if mechanism == Mechanism::C {
        gamma_grid(gamma_box.gamma2_min, gamma_box.gamma2_max, grid_points)?
    } else {
        vec![0.0]
    };
    let points: Vec<(f64, f64)> = g1.iter().flat_map(|&a| g2.iter().map(move |&b| (a, b))).collect();

    let grid = exec.map_indexed(points.len(), |idx| {
        let (gamma1, gamma2) = points[idx];
        let outcome = prepared
            .estimate(gamma1, gamma2)
            .and_then(|est| confidence_interval(&est, alpha).map(|ci| (est.rho_hat, ci)));
        match outcome {
            Ok((rho, ci)) => GridPoint { gamma1, gamma2, rho_hat: Some(rho), interval: Some(ci), status: "ok".into() },
            Err(e) => GridPoint { gamma1, gamma2, rho_hat: None, interval: None, status: e.to_string() },
        }
    });

    let failed = grid.iter().filter(|g| !g.is_ok()).count();
    let total = grid.len();
    if failed as f64 > MAX_FAILED_FRACTION * total as f64 || failed == total {
        let failures = grid.iter().filter(|g| !g.is_ok()).map(|g| (g.gamma1, g.gamma2, g.status.clone())).collect();
        return Err(Error::UnreliableRegion { failed, total, failures });
    }

    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    let mut argmin = (f64::NAN, f64::NAN);
    let mut argmax = (f64::NAN, f64::NAN);
    for g in &grid {
        if let Some(ci) = g.interval {
            if ci.lower < lower {
                lower = ci.lower;
                argmin = (g.gamma1, g.gamma2);
            }
            if ci.upper > upper {
                upper = ci.upper;
                argmax = (g.gamma1, g.gamma2);
            }
        }
    }

    let gamma_box = if mechanism == Mechanism::C {
        *gamma_box
    } else {
        GammaBox { gamma2_min: 0.0, gamma2_max: 0.0, ..*gamma_box }
    };
    Ok(UncertaintyRegion { lower, upper, gamma_box, alpha, mechanism, argmin, argmax, failed, grid })
}
