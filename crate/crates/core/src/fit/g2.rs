//! Antibunching dip model
//!
//! ```text
//! g2(τ) = b − (b − g2(0)) · exp(−k·|τ|)
//! ```
//!
//! with baseline `b` fixed at 1 unless requested otherwise. For a pumped
//! two-level emitter `k = w_p + γ`; when the decay is slow compared with the
//! pump, `k ≈ w_p` and the dip width is quoted as `2/k`.

use serde::{Deserialize, Serialize};

use super::lm::{fit_least_squares, FitOptions};
use super::{Estimate, FitError, XYData};
use crate::correlation::G2Estimate;
use crate::model::{FitReport, PS_PER_S};

/// Single-emitter boundary for g²(0).
pub const SINGLE_EMITTER_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2ModelParams {
    pub g2_0: f64,
    /// Recovery rate, s⁻¹.
    pub k: f64,
    pub baseline: f64,
}

impl G2ModelParams {
    pub fn eval(&self, tau_s: f64) -> f64 {
        self.baseline - (self.baseline - self.g2_0) * (-self.k * tau_s.abs()).exp()
    }
}

/// Model on `[g2_0, k, baseline]` with τ in seconds.
pub fn g2_model(tau_s: f64, p: &[f64]) -> f64 {
    p[2] - (p[2] - p[0]) * (-p[1] * tau_s.abs()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2FitOptions {
    pub fix_baseline: bool,
    /// Use unit weights instead of the estimate's per-bin σ.
    pub unweighted: bool,
}

impl Default for G2FitOptions {
    fn default() -> Self {
        G2FitOptions {
            fix_baseline: true,
            unweighted: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Fit {
    pub report: FitReport,
    pub g2_0: Estimate,
    /// Recovery rate in s⁻¹; absent when the dip is not resolved.
    pub k_per_s: Option<Estimate>,
    pub baseline: Estimate,
    /// Dip width `2/k` in seconds.
    pub dip_width_s: Option<Estimate>,
    /// The data show no dip, so `k` is not identifiable and only a flat
    /// level was fitted.
    pub degenerate: bool,
    /// `g2_0 + σ(g2_0) < threshold`.
    pub single_emitter_verdict: bool,
    pub verdict_threshold: f64,
}

impl G2Fit {
    pub fn params(&self) -> Option<G2ModelParams> {
        self.k_per_s.map(|k| G2ModelParams {
            g2_0: self.g2_0.value,
            k: k.value,
            baseline: self.baseline.value,
        })
    }
}

fn fit_data(est: &G2Estimate, unweighted: bool) -> Result<XYData, FitError> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut s = Vec::new();
    for ((&tau, &g), &sigma) in est.tau_centers_ps.iter().zip(&est.g2).zip(&est.sigma) {
        if unweighted || sigma > 0.0 {
            x.push(tau / PS_PER_S);
            y.push(g);
            s.push(if unweighted { 1.0 } else { sigma });
        }
    }
    XYData::new(x, y, s)
}

fn initial_guess(data: &XYData, baseline: f64) -> G2ModelParams {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data.x[a].abs().total_cmp(&data.x[b].abs()));
    let near: Vec<f64> = order.iter().take(2).map(|&i| data.y[i]).collect();
    let g2_0 = (near.iter().sum::<f64>() / near.len() as f64).clamp(0.0, baseline);
    let half = 0.5 * (baseline + g2_0);
    let tau_half = order
        .iter()
        .map(|&i| (data.x[i].abs(), data.y[i]))
        .find(|&(_, y)| y >= half)
        .map(|(t, _)| t)
        .filter(|&t| t > 0.0)
        .unwrap_or_else(|| data.x[order[order.len() / 2]].abs().max(f64::MIN_POSITIVE));
    G2ModelParams {
        g2_0,
        k: std::f64::consts::LN_2 / tau_half,
        baseline,
    }
}

fn baseline_guess(data: &XYData) -> f64 {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data.x[a].abs().total_cmp(&data.x[b].abs()));
    let tail = &order[3 * order.len() / 4..];
    tail.iter().map(|&i| data.y[i]).sum::<f64>() / tail.len() as f64
}

/// Fits the dip model to a g² estimate.
///
/// When the dip is not resolved (flat data) the rate is dropped and only the
/// level is fitted; the result is then flagged `degenerate`.
pub fn fit_g2(
    est: &G2Estimate,
    p0: Option<G2ModelParams>,
    options: G2FitOptions,
) -> Result<G2Fit, FitError> {
    let data = fit_data(est, options.unweighted)?;
    let n_params = if options.fix_baseline { 2 } else { 3 };
    data.require(n_params)?;
    let baseline0 = match p0 {
        Some(p) => p.baseline,
        None if options.fix_baseline => 1.0,
        None => baseline_guess(&data),
    };
    let p0 = p0.unwrap_or_else(|| initial_guess(&data, baseline0));
    if !(p0.k > 0.0) {
        return Err(FitError::NonPositiveRate(p0.k));
    }

    let lm = FitOptions {
        scale_covariance: true,
        ..FitOptions::default()
    };
    let attempt = if options.fix_baseline {
        let b = p0.baseline;
        let opts = lm.with_bounds(vec![(0.0, b), (f64::MIN_POSITIVE, f64::INFINITY)]);
        fit_least_squares(
            |t, p| g2_model(t, &[p[0], p[1], b]),
            &data,
            &[p0.g2_0, p0.k],
            &["g2_0", "k_per_s"],
            &opts,
        )
    } else {
        let opts = lm.with_bounds(vec![
            (0.0, f64::INFINITY),
            (f64::MIN_POSITIVE, f64::INFINITY),
            (0.0, f64::INFINITY),
        ]);
        fit_least_squares(
            g2_model,
            &data,
            &[p0.g2_0, p0.k, p0.baseline],
            &["g2_0", "k_per_s", "baseline"],
            &opts,
        )
    };

    let report = match attempt {
        Ok(r) if resolved(&r) => r,
        Ok(_) | Err(FitError::SingularNormalMatrix) => {
            return flat_fit(&data, options.fix_baseline.then_some(p0.baseline));
        }
        Err(e) => return Err(e),
    };

    let g2_0 = Estimate::new(report.values[0], report.std_errors[0]);
    let k = Estimate::new(report.values[1], report.std_errors[1]);
    if !(k.value > 0.0) {
        return Err(FitError::NonPositiveRate(k.value));
    }
    let baseline = if options.fix_baseline {
        Estimate::new(p0.baseline, 0.0)
    } else {
        Estimate::new(report.values[2], report.std_errors[2])
    };
    let dip = Estimate::new(2.0 / k.value, 2.0 * k.std_error / (k.value * k.value));
    Ok(G2Fit {
        single_emitter_verdict: g2_0.value + g2_0.std_error < SINGLE_EMITTER_THRESHOLD,
        verdict_threshold: SINGLE_EMITTER_THRESHOLD,
        report,
        g2_0,
        k_per_s: Some(k),
        baseline,
        dip_width_s: Some(dip),
        degenerate: false,
    })
}

/// A fit resolves the dip when it converged and the rate is constrained to
/// better than 100 %.
fn resolved(r: &FitReport) -> bool {
    let k = r.values[1];
    let sk = r.std_errors[1];
    r.converged && sk.is_finite() && sk < k
}

fn flat_fit(data: &XYData, fixed_baseline: Option<f64>) -> Result<G2Fit, FitError> {
    let report = fit_least_squares(
        |_, p| p[0],
        data,
        &[baseline_guess(data)],
        &["g2_0"],
        &FitOptions::default(),
    )?;
    let level = Estimate::new(report.values[0], report.std_errors[0]);
    Ok(G2Fit {
        single_emitter_verdict: level.value + level.std_error < SINGLE_EMITTER_THRESHOLD,
        verdict_threshold: SINGLE_EMITTER_THRESHOLD,
        report,
        g2_0: level,
        k_per_s: None,
        baseline: fixed_baseline.map_or(level, |b| Estimate::new(b, 0.0)),
        dip_width_s: None,
        degenerate: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoincidenceHistogram, HistogramMode, TimeStamp};

    /// Estimate with analytic values and a constant relative error.
    fn synthetic(p: &G2ModelParams, bin_ps: f64, n: usize) -> G2Estimate {
        let tau: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * bin_ps).collect();
        let g2: Vec<f64> = tau.iter().map(|t| p.eval(t / PS_PER_S)).collect();
        G2Estimate {
            sigma: vec![0.01; n],
            histogram: CoincidenceHistogram {
                bin_width_ps: bin_ps as u64,
                tau_min_ps: 0,
                tau_max_ps: (bin_ps * n as f64) as i64,
                counts: vec![0; n],
                n_start: 1,
                n_stop: 1,
                duration: TimeStamp(1),
                mode: HistogramMode::AllPairs,
            },
            tau_centers_ps: tau,
            g2,
        }
    }

    const TYPICAL: G2ModelParams = G2ModelParams {
        g2_0: 0.21,
        k: 1e9,
        baseline: 1.0,
    };

    #[test]
    fn noiseless_round_trip() {
        let est = synthetic(&TYPICAL, 100.0, 200);
        let fit = fit_g2(&est, None, G2FitOptions::default()).unwrap();
        assert!(!fit.degenerate);
        assert!(((fit.g2_0.value - 0.21) / 0.21).abs() < 1e-6);
        let k = fit.k_per_s.unwrap().value;
        assert!(((k - 1e9) / 1e9).abs() < 1e-6, "{k}");
        let w = fit.dip_width_s.unwrap().value;
        assert!((w - 2e-9).abs() < 1e-14);
        assert!(fit.single_emitter_verdict);
    }

    #[test]
    fn free_baseline_round_trip() {
        let p = G2ModelParams {
            baseline: 1.07,
            ..TYPICAL
        };
        let est = synthetic(&p, 100.0, 200);
        let fit = fit_g2(
            &est,
            None,
            G2FitOptions {
                fix_baseline: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(((fit.baseline.value - 1.07) / 1.07).abs() < 1e-6);
        assert!(((fit.k_per_s.unwrap().value - 1e9) / 1e9).abs() < 1e-6);
        assert_eq!(fit.report.names.len(), 3);
    }

    #[test]
    fn flat_poisson_data_is_degenerate() {
        let p = G2ModelParams {
            g2_0: 1.0,
            ..TYPICAL
        };
        let est = synthetic(&p, 100.0, 200);
        let fit = fit_g2(&est, None, G2FitOptions::default()).unwrap();
        assert!(fit.degenerate);
        assert!(fit.k_per_s.is_none());
        assert!((fit.g2_0.value - 1.0).abs() < 1e-9);
        assert!(!fit.single_emitter_verdict);
    }

    #[test]
    fn verdict_uses_upper_error() {
        let p = G2ModelParams {
            g2_0: 0.45,
            ..TYPICAL
        };
        let mut est = synthetic(&p, 100.0, 200);
        // noise-free values but large per-bin errors
        est.sigma = vec![0.5; 200];
        let fit = fit_g2(&est, None, G2FitOptions { unweighted: false, ..Default::default() }).unwrap();
        assert_eq!(
            fit.single_emitter_verdict,
            fit.g2_0.value + fit.g2_0.std_error < 0.5
        );
        assert_eq!(fit.verdict_threshold, 0.5);
    }

    #[test]
    fn rejects_nonpositive_rate_and_short_data() {
        let est = synthetic(&TYPICAL, 100.0, 50);
        let bad = G2ModelParams { k: 0.0, ..TYPICAL };
        assert_eq!(
            fit_g2(&est, Some(bad), G2FitOptions::default()).unwrap_err(),
            FitError::NonPositiveRate(0.0)
        );
        let short = synthetic(&TYPICAL, 100.0, 2);
        assert!(matches!(
            fit_g2(&short, None, G2FitOptions::default()),
            Err(FitError::InsufficientData { .. })
        ));
    }

    #[test]
    fn jacobian_is_step_stable_at_optimum() {
        let est = synthetic(&TYPICAL, 100.0, 200);
        let fit = fit_g2(&est, None, G2FitOptions::default()).unwrap();
        let data = fit_data(&est, false).unwrap();
        let model = |t: f64, p: &[f64]| g2_model(t, &[p[0], p[1], 1.0]);
        let full = super::super::jacobian(&model, &data, &fit.report.values, 1.0);
        let half = super::super::jacobian(&model, &data, &fit.report.values, 0.5);
        for j in 0..2 {
            let col_norm = full.column(j).norm();
            let diff = (full.column(j) - half.column(j)).norm();
            assert!(diff <= 1e-4 * col_norm, "column {j}: {diff} vs {col_norm}");
        }
    }
}
