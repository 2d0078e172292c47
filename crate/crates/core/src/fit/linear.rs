use nalgebra::{DMatrix, DVector};

use super::lm::invert_normal;
use super::{FitError, XYData};
use crate::model::FitReport;

/// Weighted linear least squares on `Σ_j p_j · basis_j(x)`.
///
/// Solved directly (QR of the weighted design matrix); the report has the
/// same conventions as [`super::fit_least_squares`], with `n_iter = 1`.
pub fn fit_linear(
    basis: &[&dyn Fn(f64) -> f64],
    data: &XYData,
    names: &[&str],
) -> Result<FitReport, FitError> {
    let m = basis.len();
    if names.len() != m {
        return Err(FitError::InvalidInput(format!("{} names for {m} basis functions", names.len())));
    }
    data.require(m)?;
    let n = data.len();
    let design = DMatrix::from_fn(n, m, |i, j| basis[j](data.x[i]) / data.sigma[i]);
    if design.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFiniteModel);
    }
    let rhs = DVector::from_iterator(n, data.y.iter().zip(&data.sigma).map(|(y, s)| y / s));
    let normal = design.transpose() * &design;
    let inv = invert_normal(&normal)?;

    let qr = design.clone().qr();
    let qty = qr.q().transpose() * &rhs;
    let coeffs = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or(FitError::SingularNormalMatrix)?;

    let resid = &rhs - &design * &coeffs;
    let chi2 = resid.norm_squared();
    let dof = n - m;
    let scale = chi2 / dof as f64;
    let covariance: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| 0.5 * (inv[(i, j)] + inv[(j, i)]) * scale).collect())
        .collect();
    let std_errors = (0..m).map(|i| covariance[i][i].max(0.0).sqrt()).collect();
    Ok(FitReport {
        names: names.iter().map(|s| s.to_string()).collect(),
        values: coeffs.iter().copied().collect(),
        std_errors,
        covariance,
        chi2,
        dof,
        converged: true,
        n_iter: 1,
    })
}
