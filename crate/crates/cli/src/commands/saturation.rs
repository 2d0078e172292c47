use std::fmt::Write as _;
use std::path::Path;

use photonlab::detection::{add_background, apply_detector, BackgroundConfig, DetectorConfig};
use photonlab::emitter::{simulate_two_level, TwoLevelEmitterConfig};
use photonlab::fit::{fit_saturation, Estimate, SaturationFit, XYData};
use photonlab::random::SeedTree;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{PipelineConfig, SaturationSweepConfig, REFERENCE_MEASURED_POWER_W};
use crate::error::CliError;
use crate::gnuplot;
use crate::output::{ensure_dir, write_json, write_text, Report, Written};

pub const POINTS_FILE: &str = "saturation_points.csv";
pub const MIN_GRID: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub intensity_w_per_m2: f64,
    pub counts: u64,
    pub rate_per_s: f64,
    pub sigma_per_s: f64,
}

/// Detected count rate at each grid intensity.
pub fn simulate_sweep(sweep: &SaturationSweepConfig, seed: u64) -> Result<Vec<SweepPoint>, CliError> {
    let seeds = SeedTree::new(seed).child("saturation");
    let detector = DetectorConfig {
        efficiency: sweep.efficiency,
        ..DetectorConfig::ideal()
    };
    sweep
        .intensities_w_per_m2
        .par_iter()
        .enumerate()
        .map(|(k, &intensity)| -> Result<SweepPoint, CliError> {
            let point = seeds.child(&k.to_string());
            let emitter = TwoLevelEmitterConfig::new(sweep.kappa_per_s_per_w_per_m2 * intensity, sweep.gamma_per_s);
            let emitted = simulate_two_level(&emitter, sweep.dwell_s, point.child("emitter").seed())?;
            let detected = apply_detector(&emitted, &detector, point.child("detector").seed())?;
            let background = BackgroundConfig {
                rate: sweep.background_slope_per_s_per_w_per_m2 * intensity,
            };
            let counts = add_background(&detected, &background, point.child("background").seed())?.len() as u64;
            Ok(SweepPoint {
                intensity_w_per_m2: intensity,
                counts,
                rate_per_s: counts as f64 / sweep.dwell_s,
                sigma_per_s: (counts.max(1) as f64).sqrt() / sweep.dwell_s,
            })
        })
        .collect()
}

pub fn sweep_data(points: &[SweepPoint]) -> Result<XYData, CliError> {
    Ok(XYData::new(
        points.iter().map(|p| p.intensity_w_per_m2).collect(),
        points.iter().map(|p| p.rate_per_s).collect(),
        points.iter().map(|p| p.sigma_per_s).collect(),
    )?)
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerativeTruth {
    pub f1_per_s: f64,
    pub i_sat_w_per_m2: f64,
    pub f2_per_s_per_w_per_m2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SaturationResults {
    pub points_file: String,
    pub points: Vec<SweepPoint>,
    pub fit: SaturationFit,
    pub truth: GenerativeTruth,
    /// `(fit − truth) / σ` for `I_sat`.
    pub i_sat_pull: f64,
    pub saturation_power_w: Estimate,
    pub fiber_diameter_m: f64,
    pub ratio_to_reference_measured_power: f64,
}

pub fn cmd_saturation(
    cfg: &PipelineConfig,
    out: &Path,
    gnuplot_stub: bool,
) -> Result<Written<SaturationResults>, CliError> {
    let sweep = &cfg.saturation;
    if sweep.intensities_w_per_m2.len() < MIN_GRID {
        return Err(CliError::GridTooSmall {
            got: sweep.intensities_w_per_m2.len(),
            needed: MIN_GRID,
        });
    }
    cfg.validate()?;
    let points = simulate_sweep(sweep, cfg.seed)?;
    let fit = fit_saturation(&sweep_data(&points)?, None)?;

    ensure_dir(out)?;
    let mut csv = String::from("intensity_w_per_m2,counts,rate_per_s,sigma_per_s,fit_per_s,signal_per_s\n");
    for p in &points {
        let i = p.intensity_w_per_m2;
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            i,
            p.counts,
            p.rate_per_s,
            p.sigma_per_s,
            fit.params.eval(i),
            p.rate_per_s - fit.params.f2 * i
        )
        .expect("string write");
    }
    let mut files = vec![write_text(&out.join(POINTS_FILE), &csv)?];

    let diameter = cfg.theory.fiber_diameter_m;
    let power = fit.saturation_power(diameter);
    let truth = GenerativeTruth {
        f1_per_s: sweep.true_f1(),
        i_sat_w_per_m2: sweep.true_i_sat(),
        f2_per_s_per_w_per_m2: sweep.background_slope_per_s_per_w_per_m2,
    };
    let results = SaturationResults {
        points_file: POINTS_FILE.into(),
        i_sat_pull: (fit.i_sat.value - truth.i_sat_w_per_m2) / fit.i_sat.std_error,
        ratio_to_reference_measured_power: power.value / REFERENCE_MEASURED_POWER_W,
        saturation_power_w: power,
        fiber_diameter_m: diameter,
        points,
        truth,
        fit,
    };
    files.push(write_json(&out.join("saturation_fit.json"), &Report::new("saturation", cfg, &results))?);
    if gnuplot_stub {
        files.push(write_text(&out.join("saturation.gp"), &gnuplot::saturation_script(POINTS_FILE, &results.fit))?);
    }
    let (converged, n_iter) = (results.fit.report.converged, results.fit.report.n_iter);
    if !converged {
        return Err(CliError::NotConverged { what: "saturation", n_iter });
    }
    Ok(Written { files, results })
}
