//! Weighted nonlinear least squares and the model fits built on it.
//!
//! The engine is a damped Gauss–Newton (Levenberg–Marquardt) iteration:
//!
//! ```text
//! (JᵀJ + λ·diag(JᵀJ)) δ = Jᵀr,   r_i = (y_i − f(x_i; p)) / σ_i
//! ```
//!
//! with `λ` starting at 10⁻³, divided by 10 after an accepted step and
//! multiplied by 10 after a rejected one. The Jacobian is taken by central
//! differences with step `max(10⁻⁶·|p_j|, 10⁻⁹)`. Proposals are clipped into
//! the parameter bounds. The covariance is `(JᵀJ)⁻¹ · χ²/dof`.

mod g2;
mod linear;
mod lm;
mod saturation;

pub use g2::{fit_g2, g2_model, G2Fit, G2FitOptions, G2ModelParams, SINGLE_EMITTER_THRESHOLD};
pub use linear::fit_linear;
pub use lm::{fit_least_squares, jacobian, Bounds, FitOptions};
pub use saturation::{
    fit_saturation, saturation_model, SaturationFit, SaturationModelParams,
};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} usable points, got {got}")]
    InsufficientData { got: usize, needed: usize },
    #[error("normal matrix is singular: parameters are not identifiable from the data")]
    SingularNormalMatrix,
    #[error("model is not finite at the initial parameters")]
    NonFiniteModel,
    #[error("recovery rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("invalid fit input: {0}")]
    InvalidInput(String),
}

/// Abscissae, ordinates and per-point 1σ uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XYData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl XYData {
    pub fn new(x: Vec<f64>, y: Vec<f64>, sigma: Vec<f64>) -> Result<Self, FitError> {
        if x.len() != y.len() || x.len() != sigma.len() {
            return Err(FitError::InvalidInput(format!(
                "length mismatch: x={}, y={}, sigma={}",
                x.len(),
                y.len(),
                sigma.len()
            )));
        }
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(FitError::InvalidInput(format!("sigma must be positive and finite, got {s}")));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(FitError::InvalidInput("non-finite data".into()));
        }
        Ok(XYData { x, y, sigma })
    }

    /// Unit weights, for curves without known errors.
    pub fn unweighted(x: Vec<f64>, y: Vec<f64>) -> Result<Self, FitError> {
        let n = x.len();
        Self::new(x, y, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub(crate) fn require(&self, n_params: usize) -> Result<(), FitError> {
        if self.len() < n_params + 1 {
            Err(FitError::InsufficientData {
                got: self.len(),
                needed: n_params + 1,
            })
        } else {
            Ok(())
        }
    }
}

/// A value with its 1σ uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn new(value: f64, std_error: f64) -> Self {
        Estimate { value, std_error }
    }

    /// Whether `truth` lies within `n` standard errors.
    pub fn covers(&self, truth: f64, n: f64) -> bool {
        (self.value - truth).abs() <= n * self.std_error
    }
}
