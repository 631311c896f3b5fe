//! Least squares and two-stage least squares with heteroskedasticity-robust
//! (sandwich) covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    /// White's estimator.
    Hc0,
    /// HC0 scaled by `n / (n - k)`.
    #[default]
    Hc1,
}

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub beta: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub ssr: f64,
    pub n: usize,
    pub k: usize,
}

impl LinearFit {
    pub fn se(&self, j: usize) -> f64 {
        self.cov[(j, j)].max(0.0).sqrt()
    }

    pub fn r_squared(&self, y: &DVector<f64>) -> f64 {
        let mean = y.mean();
        let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        if sst == 0.0 {
            if self.ssr == 0.0 { 1.0 } else { 0.0 }
        } else {
            1.0 - self.ssr / sst
        }
    }

    /// `sqrt(SSR / (n - k))`.
    pub fn rmse(&self) -> f64 {
        if self.n > self.k {
            (self.ssr / (self.n - self.k) as f64).sqrt()
        } else {
            0.0
        }
    }
}

/// Thin QR factors, after checking that no column is (numerically) a
/// combination of the columns before it.
fn checked_qr(x: &DMatrix<f64>, names: &[String]) -> Result<(DMatrix<f64>, DMatrix<f64>), ExperimentError> {
    let (n, k) = x.shape();
    if n < k {
        return Err(ExperimentError::TooFewObservations(format!(
            "{n} rows for {k} regressors"
        )));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..k {
        let norm = x.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() <= 1e-9 * norm {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("column {j}"));
            return Err(ExperimentError::RankDeficient(format!(
                "{name} is collinear with earlier regressors"
            )));
        }
    }
    Ok((qr.q(), r))
}

/// `(R'R)^{-1}` for upper-triangular `R`.
fn inverse_gram(r: &DMatrix<f64>) -> DMatrix<f64> {
    let k = r.ncols();
    let r_inv = r
        .clone()
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .expect("diagonal checked non-zero");
    &r_inv * r_inv.transpose()
}

fn sandwich(
    bread: &DMatrix<f64>,
    regressors: &DMatrix<f64>,
    residuals: &DVector<f64>,
    kind: CovarianceKind,
) -> DMatrix<f64> {
    let (n, k) = regressors.shape();
    let mut scaled = regressors.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= residuals[i];
    }
    let meat = scaled.transpose() * &scaled;
    let mut cov = bread * meat * bread;
    if kind == CovarianceKind::Hc1 && n > k {
        cov *= n as f64 / (n - k) as f64;
    }
    cov
}

pub fn ols(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    names: &[String],
    kind: CovarianceKind,
) -> Result<LinearFit, ExperimentError> {
    let (q, r) = checked_qr(x, names)?;
    let beta = r
        .solve_upper_triangular(&(q.transpose() * y))
        .expect("diagonal checked non-zero");
    let residuals = y - x * &beta;
    let bread = inverse_gram(&r);
    let cov = sandwich(&bread, x, &residuals, kind);
    Ok(LinearFit {
        ssr: residuals.norm_squared(),
        beta,
        cov,
        residuals,
        n: x.nrows(),
        k: x.ncols(),
    })
}

/// Two-stage least squares of `y` on `x` using instruments `z` (which must
/// include the exogenous columns of `x`). Residuals are structural:
/// `y - x b`, not `y - x_hat b`.
pub fn tsls(
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    names: &[String],
    instrument_names: &[String],
    kind: CovarianceKind,
) -> Result<LinearFit, ExperimentError> {
    if z.ncols() < x.ncols() {
        return Err(ExperimentError::RankDeficient(
            "fewer instruments than regressors".into(),
        ));
    }
    let (qz, _) = checked_qr(z, instrument_names)?;
    let x_hat = &qz * (qz.transpose() * x);
    let (q, r) = checked_qr(&x_hat, names)?;
    let beta = r
        .solve_upper_triangular(&(q.transpose() * y))
        .expect("diagonal checked non-zero");
    let residuals = y - x * &beta;
    let bread = inverse_gram(&r);
    let cov = sandwich(&bread, &x_hat, &residuals, kind);
    Ok(LinearFit {
        ssr: residuals.norm_squared(),
        beta,
        cov,
        residuals,
        n: x.nrows(),
        k: x.ncols(),
    })
}

/// Homoskedastic F statistic for the columns of `full` that are not in
/// `restricted`, from regressing `d` on each.
pub fn partial_f(
    d: &DVector<f64>,
    full: &DMatrix<f64>,
    full_names: &[String],
    restricted: &DMatrix<f64>,
    restricted_names: &[String],
) -> Result<f64, ExperimentError> {
    let unrestricted = ols(full, d, full_names, CovarianceKind::Hc0)?;
    let base = ols(restricted, d, restricted_names, CovarianceKind::Hc0)?;
    let q = (full.ncols() - restricted.ncols()) as f64;
    let dof = (full.nrows() - full.ncols()) as f64;
    // residual variation at round-off level means the instruments fit `d` exactly
    if unrestricted.ssr <= 1e-12 * base.ssr {
        return Ok(f64::INFINITY);
    }
    Ok(((base.ssr - unrestricted.ssr) / q) / (unrestricted.ssr / dof))
}
