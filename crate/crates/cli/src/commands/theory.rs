use std::path::Path;

use photonlab::rate_theory::{
    geometric_power, saturation_intensity, saturation_power, steady_state_ratio, EinsteinRates, FiberGeometry,
    PlanckConvention,
};
use serde::Serialize;

use crate::config::{PipelineConfig, REFERENCE_MEASURED_POWER_W, REFERENCE_P_SAT_W};
use crate::error::CliError;
use crate::output::{ensure_dir, write_json, Report, Written};

/// Relative distance from π below which the reference ratio is flagged.
pub const PI_FLAG_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct TheoryResults {
    pub geometry: FiberGeometry,
    pub planck_convention: PlanckConvention,
    pub einstein_a_per_s: f64,
    /// `B` such that `B·ρ` is a rate, for the selected convention.
    pub einstein_b: f64,
    /// Spectral saturation intensity `c·A/(2B)`.
    pub saturation_intensity_spectral: f64,
    pub steady_state_ratio_at_saturation: f64,
    /// Saturation power for the selected convention, W.
    pub p_sat_w: f64,
    pub p_sat_paper_convention_w: f64,
    pub p_sat_standard_convention_w: f64,
    pub standard_over_paper: f64,
    pub reference_p_sat_w: f64,
    /// Reference value over the paper-convention evaluation.
    pub reference_over_evaluated: f64,
    pub reference_ratio_near_pi: bool,
    pub discrepancy_note: String,
    pub intensity_w_per_m2: f64,
    pub fiber_diameter_m: f64,
    pub geometric_power_w: f64,
    pub reference_measured_power_w: f64,
    pub geometric_over_reference_measured: f64,
}

pub fn theory(cfg: &PipelineConfig) -> Result<TheoryResults, CliError> {
    cfg.validate()?;
    let t = &cfg.theory;
    let geom = t.geometry()?;
    let rates = EinsteinRates::from_planck(t.einstein_a_per_s, geom.wavelength_m, t.planck_convention);
    rates.validate()?;
    let i_sat = saturation_intensity(&rates);
    let p_paper = saturation_power(&geom, PlanckConvention::Paper);
    let p_standard = saturation_power(&geom, PlanckConvention::Standard);
    let ratio = REFERENCE_P_SAT_W / p_paper;
    let near_pi = (ratio / std::f64::consts::PI - 1.0).abs() < PI_FLAG_TOLERANCE;
    let discrepancy_note = if near_pi {
        format!(
            "reference {:.3e} W is {ratio:.4} x the evaluated {p_paper:.4e} W, within {:.0}% of pi; reported, not resolved",
            REFERENCE_P_SAT_W,
            100.0 * PI_FLAG_TOLERANCE
        )
    } else {
        format!("reference {:.3e} W is {ratio:.4} x the evaluated {p_paper:.4e} W", REFERENCE_P_SAT_W)
    };
    let geometric = geometric_power(t.intensity_w_per_m2, t.fiber_diameter_m);
    Ok(TheoryResults {
        geometry: geom,
        planck_convention: t.planck_convention,
        einstein_a_per_s: rates.a,
        einstein_b: rates.b,
        saturation_intensity_spectral: i_sat,
        steady_state_ratio_at_saturation: steady_state_ratio(i_sat, &rates),
        p_sat_w: saturation_power(&geom, t.planck_convention),
        p_sat_paper_convention_w: p_paper,
        p_sat_standard_convention_w: p_standard,
        standard_over_paper: p_standard / p_paper,
        reference_p_sat_w: REFERENCE_P_SAT_W,
        reference_over_evaluated: ratio,
        reference_ratio_near_pi: near_pi,
        discrepancy_note,
        intensity_w_per_m2: t.intensity_w_per_m2,
        fiber_diameter_m: t.fiber_diameter_m,
        geometric_power_w: geometric,
        reference_measured_power_w: REFERENCE_MEASURED_POWER_W,
        geometric_over_reference_measured: geometric / REFERENCE_MEASURED_POWER_W,
    })
}

pub fn cmd_theory(cfg: &PipelineConfig, out: &Path) -> Result<Written<TheoryResults>, CliError> {
    let results = theory(cfg)?;
    ensure_dir(out)?;
    let report = write_json(&out.join("theory.json"), &Report::new("theory", cfg, &results))?;
    Ok(Written {
        files: vec![report],
        results,
    })
}
