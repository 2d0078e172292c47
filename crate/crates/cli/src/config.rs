//! Pipeline configuration.
//!
//! Every physical quantity carries its unit in the key. Missing keys take
//! their defaults, unknown keys are rejected so a misspelled unit suffix
//! cannot pass silently.

use std::path::{Path, PathBuf};

use photonlab::correlation::{Binning, DEFAULT_BIN_WIDTH_PS, DEFAULT_TAU_MAX_PS};
use photonlab::detection::{BackgroundConfig, DetectorConfig, SplitterConfig};
use photonlab::emitter::{TwoLevelEmitterConfig, DEFAULT_GAMMA_PER_S};
use photonlab::rate_theory::{FiberGeometry, PlanckConvention, FIBER_DIAMETER_M};
use photonlab::HistogramMode;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Saturation intensity targeted by the default sweep, W/m².
pub const DEFAULT_SWEEP_I_SAT_W_PER_M2: f64 = 7.1e4;
/// Quoted theoretical saturation power, W.
pub const REFERENCE_P_SAT_W: f64 = 57e-6;
/// Quoted measured saturation power, W.
pub const REFERENCE_MEASURED_POWER_W: f64 = 0.61e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub emitter: TwoLevelEmitterConfig,
    /// Detectors on channels 0 and 1.
    pub detectors: [DetectorConfig; 2],
    pub splitter: SplitterConfig,
    /// Uncorrelated light entering the collection path ahead of the splitter.
    pub background: BackgroundConfig,
    pub histogram: HistogramConfig,
    pub saturation: SaturationSweepConfig,
    pub theory: TheoryConfig,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    /// A bright, fast-recovering emitter that yields about 10⁶ photons in
    /// the default 10 ms; the long-lived defaults of the emitter model would
    /// need hours of simulated time for a usable histogram.
    fn default() -> Self {
        PipelineConfig {
            seed: 1,
            duration_s: 10e-3,
            emitter: TwoLevelEmitterConfig::new(1e9, 1e8),
            detectors: [DetectorConfig::default(); 2],
            splitter: SplitterConfig::default(),
            background: BackgroundConfig::default(),
            histogram: HistogramConfig::default(),
            saturation: SaturationSweepConfig::default(),
            theory: TheoryConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramConfig {
    pub bin_width_ps: u64,
    pub tau_max_ps: i64,
    pub mode: HistogramMode,
    /// Histogram `[-tau_max, tau_max)` instead of `[0, tau_max)`.
    pub signed: bool,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        HistogramConfig {
            bin_width_ps: DEFAULT_BIN_WIDTH_PS,
            tau_max_ps: DEFAULT_TAU_MAX_PS,
            mode: HistogramMode::AllPairs,
            signed: false,
        }
    }
}

impl HistogramConfig {
    pub fn binning(&self) -> Binning {
        if self.signed {
            Binning::symmetric(self.bin_width_ps, self.tau_max_ps)
        } else {
            Binning::forward(self.bin_width_ps, self.tau_max_ps)
        }
    }
}

/// Pump-intensity sweep. The pump rate is `w_p = kappa · I`; emission is
/// thinned by `efficiency` and a detected background `slope · I` is added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaturationSweepConfig {
    pub intensities_w_per_m2: Vec<f64>,
    pub gamma_per_s: f64,
    pub kappa_per_s_per_w_per_m2: f64,
    pub efficiency: f64,
    pub background_slope_per_s_per_w_per_m2: f64,
    pub dwell_s: f64,
}

impl Default for SaturationSweepConfig {
    fn default() -> Self {
        let i_sat = DEFAULT_SWEEP_I_SAT_W_PER_M2;
        let n = 16;
        let (lo, hi) = (0.1 * i_sat, 20.0 * i_sat);
        let intensities_w_per_m2 = (0..n)
            .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
            .collect();
        let gamma = DEFAULT_GAMMA_PER_S;
        let efficiency = 0.1;
        SaturationSweepConfig {
            intensities_w_per_m2,
            gamma_per_s: gamma,
            kappa_per_s_per_w_per_m2: gamma / (2.0 * i_sat),
            efficiency,
            // signal : background = 4 : 1 at the saturation intensity
            background_slope_per_s_per_w_per_m2: efficiency * gamma / 3.0 / 4.0 / i_sat,
            dwell_s: 10.0,
        }
    }
}

impl SaturationSweepConfig {
    /// Generative `I_sat = gamma / (2 kappa)`.
    pub fn true_i_sat(&self) -> f64 {
        self.gamma_per_s / (2.0 * self.kappa_per_s_per_w_per_m2)
    }

    /// Generative `F1 = efficiency · gamma`.
    pub fn true_f1(&self) -> f64 {
        self.efficiency * self.gamma_per_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    /// `appendix` or `geometric`; the optional fields below override it.
    pub geometry_preset: String,
    pub cross_section_m2: Option<f64>,
    pub wavelength_m: Option<f64>,
    pub linewidth_m: Option<f64>,
    pub planck_convention: PlanckConvention,
    pub einstein_a_per_s: f64,
    pub intensity_w_per_m2: f64,
    pub fiber_diameter_m: f64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            geometry_preset: "appendix".into(),
            cross_section_m2: None,
            wavelength_m: None,
            linewidth_m: None,
            planck_convention: PlanckConvention::Paper,
            einstein_a_per_s: DEFAULT_GAMMA_PER_S,
            intensity_w_per_m2: DEFAULT_SWEEP_I_SAT_W_PER_M2,
            fiber_diameter_m: FIBER_DIAMETER_M,
        }
    }
}

impl TheoryConfig {
    pub fn geometry(&self) -> Result<FiberGeometry, CliError> {
        let base = FiberGeometry::preset(&self.geometry_preset).ok_or_else(|| {
            config_err(
                "theory.geometry_preset",
                format!("unknown preset `{}` (expected appendix or geometric)", self.geometry_preset),
            )
        })?;
        Ok(FiberGeometry {
            cross_section_m2: self.cross_section_m2.unwrap_or(base.cross_section_m2),
            wavelength_m: self.wavelength_m.unwrap_or(base.wavelength_m),
            linewidth_m: self.linewidth_m.unwrap_or(base.linewidth_m),
        })
    }
}

fn config_err(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_err(path, format!("must be positive and finite, got {v}")))
    }
}

impl PipelineConfig {
    /// Parses JSON; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Checks every sub-config.
    pub fn validate(&self) -> Result<(), CliError> {
        positive("duration_s", self.duration_s)?;
        self.emitter.validate().map_err(|e| config_err("emitter", e.to_string()))?;
        for (k, d) in self.detectors.iter().enumerate() {
            d.validate().map_err(|e| config_err(&format!("detectors[{k}]"), e.to_string()))?;
        }
        self.splitter.validate().map_err(|e| config_err("splitter", e.to_string()))?;
        self.background.validate().map_err(|e| config_err("background", e.to_string()))?;

        let h = &self.histogram;
        if h.bin_width_ps == 0 {
            return Err(config_err("histogram.bin_width_ps", "must be > 0"));
        }
        if h.tau_max_ps <= 0 || h.bin_width_ps as i64 > h.tau_max_ps {
            return Err(config_err(
                "histogram.tau_max_ps",
                format!("must be >= bin_width_ps ({}), got {}", h.bin_width_ps, h.tau_max_ps),
            ));
        }

        let s = &self.saturation;
        for (k, &i) in s.intensities_w_per_m2.iter().enumerate() {
            if !(i.is_finite() && i >= 0.0) {
                return Err(config_err(
                    &format!("saturation.intensities_w_per_m2[{k}]"),
                    format!("must be finite and >= 0, got {i}"),
                ));
            }
        }
        positive("saturation.gamma_per_s", s.gamma_per_s)?;
        positive("saturation.kappa_per_s_per_w_per_m2", s.kappa_per_s_per_w_per_m2)?;
        positive("saturation.dwell_s", s.dwell_s)?;
        if !(s.efficiency > 0.0 && s.efficiency <= 1.0) {
            return Err(config_err("saturation.efficiency", format!("must lie in (0, 1], got {}", s.efficiency)));
        }
        let slope = s.background_slope_per_s_per_w_per_m2;
        if !(slope.is_finite() && slope >= 0.0) {
            return Err(config_err(
                "saturation.background_slope_per_s_per_w_per_m2",
                format!("must be finite and >= 0, got {slope}"),
            ));
        }

        let t = &self.theory;
        t.geometry()?
            .validate()
            .map_err(|e| config_err("theory", e.to_string()))?;
        positive("theory.einstein_a_per_s", t.einstein_a_per_s)?;
        positive("theory.fiber_diameter_m", t.fiber_diameter_m)?;
        if !(t.intensity_w_per_m2.is_finite() && t.intensity_w_per_m2 >= 0.0) {
            return Err(config_err("theory.intensity_w_per_m2", "must be finite and >= 0"));
        }
        Ok(())
    }
}
