//! Ordinary least squares through a Householder QR factorization.
//!
//! The factorization is kept around so the same design can be reused for
//! several right-hand sides (the outcome and the Mills-ratio vector).

use nalgebra::{DMatrix, DVector, Dyn, QR};

use crate::error::{Error, Result};
use crate::model::RCOND_THRESHOLD;

/// Result of regressing one response on a design.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    /// `rss / (n - k)`.
    pub residual_variance: f64,
    pub rss: f64,
    pub n: usize,
    pub k: usize,
    pub xtx_inv: DMatrix<f64>,
}

/// Orthogonal projection of a vector onto the column space of a design.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `(XᵀX)⁻¹Xᵀv`
    pub coef: Vec<f64>,
    /// `vᵀX(XᵀX)⁻¹Xᵀv`
    pub explained_ss: f64,
    /// `vᵀ(I − X(XᵀX)⁻¹Xᵀ)v`
    pub residual_ss: f64,
}

/// A factorized full-rank design matrix.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    qr: QR<f64, Dyn, Dyn>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    rcond: f64,
    n: usize,
    k: usize,
}

impl LeastSquares {
    pub fn new(design: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = design.shape();
        if n <= k {
            return Err(Error::InsufficientData { rows: n, cols: k });
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("design contains non-finite values".into()));
        }
        let qr = QR::new(design.clone());
        let r = qr.r();
        let rcond = rcond_from_r(&r);
        if rcond < RCOND_THRESHOLD {
            return Err(Error::Design(format!(
                "reciprocal condition number of XᵀX is {rcond:.3e} (threshold {RCOND_THRESHOLD:.0e})"
            )));
        }
        let r_inv = r
            .clone()
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .ok_or_else(|| Error::Design("triangular factor is singular".into()))?;
        Ok(Self { qr, r, r_inv, rcond, n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Reciprocal condition number of the column-equilibrated `XᵀX`.
    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    /// `(XᵀX)⁻¹ = R⁻¹R⁻ᵀ`.
    pub fn xtx_inv(&self) -> DMatrix<f64> {
        &self.r_inv * self.r_inv.transpose()
    }

    /// Diagonal element `[(XᵀX)⁻¹]_jj`, the squared norm of row `j` of `R⁻¹`.
    pub fn xtx_inv_diag(&self, j: usize) -> f64 {
        self.r_inv.row(j).norm_squared()
    }

    fn rotate(&self, v: &[f64]) -> Result<DVector<f64>> {
        if v.len() != self.n {
            return Err(Error::Domain(format!("response has {} rows, design has {}", v.len(), self.n)));
        }
        let mut qtv = DVector::from_column_slice(v);
        self.qr.q_tr_mul(&mut qtv);
        Ok(qtv)
    }

    pub fn project(&self, v: &[f64]) -> Result<Projection> {
        let qtv = self.rotate(v)?;
        let head = qtv.rows(0, self.k).into_owned();
        let coef = self
            .r
            .solve_upper_triangular(&head)
            .ok_or_else(|| Error::Design("triangular factor is singular".into()))?;
        Ok(Projection {
            coef: coef.as_slice().to_vec(),
            explained_ss: head.norm_squared(),
            residual_ss: qtv.rows(self.k, self.n - self.k).norm_squared(),
        })
    }

    pub fn fit(&self, y: &[f64]) -> Result<OlsFit> {
        let proj = self.project(y)?;
        Ok(OlsFit {
            coef: proj.coef,
            residual_variance: proj.residual_ss / (self.n - self.k) as f64,
            rss: proj.residual_ss,
            n: self.n,
            k: self.k,
            xtx_inv: self.xtx_inv(),
        })
    }
}

/// Regresses `y` on `design`.
pub fn ols_fit(design: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit> {
    LeastSquares::new(design)?.fit(y)
}

/// Reciprocal condition number of `XᵀX` after scaling the columns of `X`
/// to unit norm. Returns 0 for designs with a zero column or fewer rows
/// than columns.
pub fn gram_rcond(design: &DMatrix<f64>) -> f64 {
    let (n, k) = design.shape();
    if n < k || k == 0 || design.iter().any(|v| !v.is_finite()) {
        return 0.0;
    }
    rcond_from_r(&QR::new(design.clone()).r())
}

fn rcond_from_r(r: &DMatrix<f64>) -> f64 {
    let k = r.ncols();
    let mut scaled = r.clone();
    for j in 0..k {
        let norm = r.column(j).norm();
        if norm == 0.0 {
            return 0.0;
        }
        scaled.column_mut(j).unscale_mut(norm);
    }
    let sv = scaled.singular_values();
    let max = sv.max();
    let min = sv.min();
    if max == 0.0 {
        return 0.0;
    }
    (min / max).powi(2)
}
