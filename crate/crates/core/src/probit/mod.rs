//! Maximum-likelihood probit regression for the selection models.

mod mills;

pub use mills::{inverse_mills, ln_normal_cdf, normal_cdf, normal_pdf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RCOND_THRESHOLD;
use crate::regression::gram_rcond;

use mills::inverse_mills_unchecked;

pub const MAX_ITERATIONS: usize = 100;
/// Convergence tolerance on the max-norm of the score in standardized coordinates.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
/// Standardized coefficients beyond this magnitude indicate separation.
pub const SEPARATION_LIMIT: f64 = 30.0;

const MAX_HALVINGS: usize = 40;

/// Fitted probit selection model `P(z = 1 | x) = Φ(xδ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbitFit {
    pub delta_hat: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Score max-norm in standardized coordinates at `delta_hat`.
    pub gradient_norm: f64,
    /// `û = −xδ̂` on the rows with `z = true`, in row order.
    pub linear_index_u: Vec<f64>,
}

impl ProbitFit {
    /// `−Xδ̂` for an arbitrary design with the same columns.
    pub fn linear_index(&self, design: &DMatrix<f64>) -> Vec<f64> {
        let delta = DVector::from_column_slice(&self.delta_hat);
        (design * delta).iter().map(|v| -v).collect()
    }
}

/// Elementwise inverse Mills ratio of the fit's linear index.
pub fn mills_vector(fit: &ProbitFit) -> Result<Vec<f64>> {
    if !fit.converged {
        return Err(Error::NotConverged { iterations: fit.iterations, gradient: fit.gradient_norm });
    }
    fit.linear_index_u.iter().map(|&u| inverse_mills(u)).collect()
}

/// Affine map between original and standardized coefficients.
///
/// Non-constant columns are centred (when the design has an intercept) and
/// scaled to unit standard deviation; the intercept absorbs the centring.
struct Standardizer {
    intercept: Option<(usize, f64)>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl Standardizer {
    fn new(design: &DMatrix<f64>) -> Self {
        let n = design.nrows() as f64;
        let k = design.ncols();
        let mut intercept = None;
        let mut means = vec![0.0; k];
        let mut sds = vec![1.0; k];
        for j in 0..k {
            let col = design.column(j);
            let first = col[0];
            if col.iter().all(|&v| v == first) && first != 0.0 {
                if intercept.is_none() {
                    intercept = Some((j, first));
                }
                continue;
            }
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            means[j] = mean;
            sds[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        if intercept.is_none() {
            means.iter_mut().for_each(|m| *m = 0.0);
        }
        Self { intercept, means, sds }
    }

    /// Standardized coefficients for original coefficients `delta`.
    fn forward(&self, delta: &DVector<f64>) -> Vec<f64> {
        let mut out: Vec<f64> = delta.iter().zip(&self.sds).map(|(d, s)| d * s).collect();
        if let Some((j0, c)) = self.intercept {
            let shift: f64 = (0..delta.len()).filter(|&j| j != j0).map(|j| delta[j] * self.means[j]).sum();
            out[j0] = delta[j0] * c + shift;
        }
        out
    }

    /// Score in standardized coordinates from the score in original ones.
    fn gradient(&self, g: &DVector<f64>) -> DVector<f64> {
        match self.intercept {
            Some((j0, c)) => {
                let g0 = g[j0] / c;
                DVector::from_fn(g.len(), |j, _| if j == j0 { g0 } else { (g[j] - self.means[j] * g0) / self.sds[j] })
            }
            None => DVector::from_fn(g.len(), |j, _| g[j] / self.sds[j]),
        }
    }
}

struct Evaluation {
    loglik: f64,
    gradient: DVector<f64>,
    hessian: DMatrix<f64>,
}

fn loglik(design: &DMatrix<f64>, z: &[bool], delta: &DVector<f64>) -> f64 {
    let t = design * delta;
    t.iter().zip(z).map(|(&t, &zi)| if zi { ln_normal_cdf(t) } else { ln_normal_cdf(-t) }).sum()
}

fn evaluate(design: &DMatrix<f64>, z: &[bool], delta: &DVector<f64>) -> Evaluation {
    let (n, k) = design.shape();
    let t = design * delta;
    let mut loglik = 0.0;
    let mut score = DVector::zeros(n);
    let mut weight = DVector::zeros(n);
    for i in 0..n {
        let ti = t[i];
        if z[i] {
            let l = inverse_mills_unchecked(-ti);
            loglik += ln_normal_cdf(ti);
            score[i] = l;
            weight[i] = l * (l + ti);
        } else {
            let l = inverse_mills_unchecked(ti);
            loglik += ln_normal_cdf(-ti);
            score[i] = -l;
            weight[i] = l * (l - ti);
        }
    }
    let gradient = design.transpose() * &score;
    let mut weighted = design.clone();
    for j in 0..k {
        weighted.column_mut(j).component_mul_assign(&weight);
    }
    let hessian = design.transpose() * weighted;
    Evaluation { loglik, gradient, hessian }
}

/// Solves `H s = g` for symmetric positive definite `H` after diagonal equilibration.
fn newton_step(hessian: &DMatrix<f64>, gradient: &DVector<f64>) -> Option<DVector<f64>> {
    let k = gradient.len();
    let scale: Vec<f64> = (0..k).map(|j| 1.0 / hessian[(j, j)].sqrt()).collect();
    if scale.iter().any(|s| !s.is_finite()) {
        return None;
    }
    let h = DMatrix::from_fn(k, k, |i, j| hessian[(i, j)] * scale[i] * scale[j]);
    let g = DVector::from_fn(k, |i, _| gradient[i] * scale[i]);
    let y = h.cholesky()?.solve(&g);
    Some(DVector::from_fn(k, |i, _| y[i] * scale[i]))
}

/// Fits `P(z = 1 | x) = Φ(xδ)` by Newton–Raphson with step halving.
///
/// Iteration stops once the standardized score max-norm drops below
/// [`GRADIENT_TOLERANCE`] or after [`MAX_ITERATIONS`] steps; in the latter
/// case the fit is returned with `converged = false`.
pub fn fit_probit(design: &DMatrix<f64>, z: &[bool]) -> Result<ProbitFit> {
    let (n, k) = design.shape();
    if z.len() != n {
        return Err(Error::Domain(format!("indicator has {} rows, design has {n}", z.len())));
    }
    let selected = z.iter().filter(|&&v| v).count();
    if selected == 0 || selected == n {
        return Err(Error::Degenerate { n, all_observed: selected == n });
    }
    if n <= k {
        return Err(Error::InsufficientData { rows: n, cols: k });
    }
    let rcond = gram_rcond(design);
    if rcond < RCOND_THRESHOLD {
        return Err(Error::Design(format!("selection design rcond {rcond:.3e}")));
    }

    let std = Standardizer::new(design);
    let mut delta = DVector::zeros(k);
    let mut eval = evaluate(design, z, &delta);
    let mut grad_norm = std.gradient(&eval.gradient).amax();
    let mut iterations = 0;
    let mut converged = grad_norm < GRADIENT_TOLERANCE;

    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        let Some(step) = newton_step(&eval.hessian, &eval.gradient) else {
            break;
        };
        let slack = 64.0 * f64::EPSILON * (eval.loglik.abs() + 1.0);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = &delta + &step * scale;
            if loglik(design, z, &candidate) >= eval.loglik - slack {
                accepted = Some(candidate);
                break;
            }
            scale *= 0.5;
        }
        let Some(next) = accepted else {
            break;
        };
        delta = next;

        if let Some((index, value)) =
            std.forward(&delta).into_iter().enumerate().find(|(_, v)| v.abs() > SEPARATION_LIMIT || !v.is_finite())
        {
            return Err(Error::Separation { index, value });
        }

        eval = evaluate(design, z, &delta);
        grad_norm = std.gradient(&eval.gradient).amax();
        converged = grad_norm < GRADIENT_TOLERANCE;
    }

    let linear_index_u = (0..n).filter(|&i| z[i]).map(|i| -(design.row(i) * &delta)[0]).collect();

    Ok(ProbitFit {
        delta_hat: delta.as_slice().to_vec(),
        loglik: eval.loglik,
        iterations,
        converged,
        gradient_norm: grad_norm,
        linear_index_u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intercept_only(n: usize, n_true: usize) -> (DMatrix<f64>, Vec<bool>) {
        (DMatrix::from_element(n, 1, 1.0), (0..n).map(|i| i < n_true).collect())
    }

    #[test]
    fn half_selected_gives_zero() {
        let (x, z) = intercept_only(200, 100);
        let fit = fit_probit(&x, &z).unwrap();
        assert!(fit.converged);
        assert!(fit.delta_hat[0].abs() < 1e-12);
    }

    #[test]
    fn quantile_recovered_for_intercept_only() {
        let (x, z) = intercept_only(10_000, 8_413);
        let fit = fit_probit(&x, &z).unwrap();
        assert!((fit.delta_hat[0] - 1.0).abs() < 1e-3, "{}", fit.delta_hat[0]);
        // exact MLE is Φ⁻¹(0.8413)
        let p = normal_cdf(fit.delta_hat[0]);
        assert!((p - 0.8413).abs() < 1e-10);
    }

    #[test]
    fn degenerate_indicator() {
        let (x, z) = intercept_only(20, 20);
        assert!(matches!(fit_probit(&x, &z), Err(Error::Degenerate { all_observed: true, .. })));
        let (x, z) = intercept_only(20, 0);
        assert!(matches!(fit_probit(&x, &z), Err(Error::Degenerate { all_observed: false, .. })));
    }

    #[test]
    fn separated_data_is_detected() {
        let x = DMatrix::from_fn(40, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let z: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        assert!(matches!(fit_probit(&x, &z), Err(Error::Separation { .. })));
    }

    #[test]
    fn rank_deficient_design() {
        let x = DMatrix::from_fn(30, 3, |i, j| match j {
            0 => 1.0,
            _ => (i % 7) as f64,
        });
        let z: Vec<bool> = (0..30).map(|i| i % 3 == 0).collect();
        assert!(matches!(fit_probit(&x, &z), Err(Error::Design(_))));
    }

    #[test]
    fn mills_vector_shapes() {
        let fit = ProbitFit {
            delta_hat: vec![0.0],
            loglik: 0.0,
            iterations: 1,
            converged: true,
            gradient_norm: 0.0,
            linear_index_u: vec![0.0, 0.0, 0.0],
        };
        let m = mills_vector(&fit).unwrap();
        assert_eq!(m.len(), 3);
        for v in m {
            assert!((v - 0.797_884_560_802_865_4).abs() < 1e-15);
        }
        let fit = ProbitFit { linear_index_u: vec![-10.0], ..fit };
        let m = mills_vector(&fit).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m[0] / 7.694_598_626_706_42e-23 - 1.0).abs() < 1e-12);
        let fit = ProbitFit { converged: false, ..fit };
        assert!(mills_vector(&fit).is_err());
    }

    #[test]
    fn standardizer_roundtrip() {
        let x = DMatrix::from_fn(6, 3, |i, j| match j {
            0 => 1.0,
            1 => 60.0 + i as f64 * 3.0,
            _ => (i % 2) as f64,
        });
        let s = Standardizer::new(&x);
        let delta = DVector::from_vec(vec![2.0, -0.04, 0.3]);
        let tilde = s.forward(&delta);
        // identical linear predictor from the standardized design
        for i in 0..6 {
            let orig: f64 = (0..3).map(|j| x[(i, j)] * delta[j]).sum();
            let stdz: f64 = tilde[0] + (1..3).map(|j| (x[(i, j)] - s.means[j]) / s.sds[j] * tilde[j]).sum::<f64>();
            assert!((orig - stdz).abs() < 1e-12);
        }
    }
}
