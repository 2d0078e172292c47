use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{FitError, XYData};
use crate::model::FitReport;

/// Inclusive lower/upper bound per parameter.
pub type Bounds = Vec<(f64, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    pub initial_damping: f64,
    pub damping_factor: f64,
    /// Converged when an accepted step changes χ² by less than this, relative.
    pub chi2_rel_tol: f64,
    /// Converged when the step is shorter than this, relative to |p|.
    pub step_tol: f64,
    pub bounds: Option<Bounds>,
    /// Scale the covariance by χ²/dof. Off means the σ are taken as absolute.
    pub scale_covariance: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 200,
            initial_damping: 1e-3,
            damping_factor: 10.0,
            chi2_rel_tol: 1e-10,
            step_tol: 1e-12,
            bounds: None,
            scale_covariance: true,
        }
    }
}

impl FitOptions {
    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = Some(bounds);
        self
    }
}

/// Reciprocal condition of the correlation-scaled normal matrix below which
/// the parameters are treated as not identifiable.
const MIN_RCOND: f64 = 1e-13;

fn clip(p: &mut [f64], bounds: Option<&Bounds>) {
    if let Some(b) = bounds {
        for (v, &(lo, hi)) in p.iter_mut().zip(b) {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Indices at a bound whose descent direction points out of the box.
fn pinned(p: &[f64], g: &DVector<f64>, bounds: Option<&Bounds>) -> Vec<usize> {
    let Some(b) = bounds else { return Vec::new() };
    (0..p.len())
        .filter(|&j| (p[j] <= b[j].0 && g[j] < 0.0) || (p[j] >= b[j].1 && g[j] > 0.0))
        .collect()
}

fn residuals<F>(model: &F, data: &XYData, p: &[f64]) -> Option<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let r: Vec<f64> = data
        .x
        .iter()
        .zip(&data.y)
        .zip(&data.sigma)
        .map(|((&x, &y), &s)| (y - model(x, p)) / s)
        .collect();
    r.iter().all(|v| v.is_finite()).then_some(r)
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Weighted Jacobian `∂f(x_i; p)/∂p_j / σ_i` by central differences.
///
/// `step_scale` multiplies the default step `max(10⁻⁶·|p_j|, 10⁻⁹)`.
pub fn jacobian<F>(model: &F, data: &XYData, p: &[f64], step_scale: f64) -> DMatrix<f64>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let n = data.len();
    let m = p.len();
    let mut jac = DMatrix::zeros(n, m);
    let mut work = p.to_vec();
    for j in 0..m {
        let h = (1e-6 * p[j].abs()).max(1e-9) * step_scale;
        work[j] = p[j] + h;
        let plus: Vec<f64> = data.x.iter().map(|&x| model(x, &work)).collect();
        work[j] = p[j] - h;
        let minus: Vec<f64> = data.x.iter().map(|&x| model(x, &work)).collect();
        work[j] = p[j];
        for i in 0..n {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h) / data.sigma[i];
        }
    }
    jac
}

/// Inverse of a symmetric positive definite normal matrix, refusing
/// matrices whose correlation-scaled form is numerically singular.
pub(crate) fn invert_normal(a: &DMatrix<f64>) -> Result<DMatrix<f64>, FitError> {
    let m = a.nrows();
    let d: Vec<f64> = (0..m).map(|j| a[(j, j)]).collect();
    if d.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(FitError::SingularNormalMatrix);
    }
    let scale = DVector::from_iterator(m, d.iter().map(|v| 1.0 / v.sqrt()));
    let scaled = DMatrix::from_fn(m, m, |i, j| a[(i, j)] * scale[i] * scale[j]);
    let eig = SymmetricEigen::new(scaled.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > MIN_RCOND * max) {
        return Err(FitError::SingularNormalMatrix);
    }
    let inv_scaled = scaled
        .cholesky()
        .ok_or(FitError::SingularNormalMatrix)?
        .inverse();
    Ok(DMatrix::from_fn(m, m, |i, j| inv_scaled[(i, j)] * scale[i] * scale[j]))
}

/// Minimizes `Σ ((y_i − model(x_i; p)) / σ_i)²` from `p0`.
///
/// Hitting `max_iter` is not an error: the report comes back with
/// `converged = false`.
pub fn fit_least_squares<F>(
    model: F,
    data: &XYData,
    p0: &[f64],
    names: &[&str],
    options: &FitOptions,
) -> Result<FitReport, FitError>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let m = p0.len();
    if names.len() != m {
        return Err(FitError::InvalidInput(format!(
            "{} names for {} parameters",
            names.len(),
            m
        )));
    }
    if let Some(b) = &options.bounds {
        if b.len() != m {
            return Err(FitError::InvalidInput(format!("{} bounds for {m} parameters", b.len())));
        }
    }
    if p0.iter().any(|v| !v.is_finite()) {
        return Err(FitError::InvalidInput("initial parameters must be finite".into()));
    }
    data.require(m)?;
    let bounds = options.bounds.as_ref();

    let mut p = p0.to_vec();
    clip(&mut p, bounds);
    let mut r = residuals(&model, data, &p).ok_or(FitError::NonFiniteModel)?;
    let mut chi2 = sum_sq(&r);
    let mut lambda = options.initial_damping;
    let mut converged = chi2 == 0.0;
    let mut n_iter = 0;

    let mut jac = jacobian(&model, data, &p, 1.0);
    while !converged && n_iter < options.max_iter {
        n_iter += 1;
        let jt = jac.transpose();
        let a = &jt * &jac;
        let mut g = &jt * DVector::from_column_slice(&r);
        let max_diag = (0..m).map(|j| a[(j, j)]).fold(0.0, f64::max);
        let floor = if max_diag > 0.0 { 1e-15 * max_diag } else { 1.0 };

        let mut damped = a.clone();
        for j in 0..m {
            damped[(j, j)] += lambda * a[(j, j)].max(floor);
        }
        // parameters held at a bound by the gradient stay fixed for this step
        for j in pinned(&p, &g, bounds) {
            for i in 0..m {
                damped[(i, j)] = 0.0;
                damped[(j, i)] = 0.0;
            }
            damped[(j, j)] = 1.0;
            g[j] = 0.0;
        }
        let step = damped
            .clone()
            .cholesky()
            .map(|c| c.solve(&g))
            .or_else(|| damped.lu().solve(&g));

        let Some(step) = step else {
            lambda *= options.damping_factor;
            continue;
        };

        let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        clip(&mut trial, bounds);
        let step_norm = trial
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tiny_step = step_norm <= options.step_tol * p_norm.max(f64::MIN_POSITIVE);

        match residuals(&model, data, &trial) {
            Some(r_new) if sum_sq(&r_new) <= chi2 => {
                let chi2_new = sum_sq(&r_new);
                let rel = (chi2 - chi2_new) / chi2.max(f64::MIN_POSITIVE);
                p = trial;
                r = r_new;
                chi2 = chi2_new;
                lambda = (lambda / options.damping_factor).max(1e-300);
                if rel < options.chi2_rel_tol || tiny_step || chi2 == 0.0 {
                    converged = true;
                } else {
                    jac = jacobian(&model, data, &p, 1.0);
                }
            }
            _ => {
                lambda *= options.damping_factor;
                if tiny_step {
                    converged = true;
                }
            }
        }
    }

    let dof = data.len() - m;
    let jac = jacobian(&model, data, &p, 1.0);
    let normal = jac.transpose() * &jac;
    let inv = invert_normal(&normal)?;
    let scale = if options.scale_covariance { chi2 / dof as f64 } else { 1.0 };
    let covariance: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| 0.5 * (inv[(i, j)] + inv[(j, i)]) * scale)
                .collect()
        })
        .collect();
    let std_errors = (0..m).map(|i| covariance[i][i].max(0.0).sqrt()).collect();

    Ok(FitReport {
        names: names.iter().map(|s| s.to_string()).collect(),
        values: p,
        std_errors,
        covariance,
        chi2,
        dof,
        converged,
        n_iter,
    })
}
