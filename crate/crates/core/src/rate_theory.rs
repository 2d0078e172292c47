//! Two-level rate-equation theory of pump saturation in a fiber.
//!
//! Populations obey
//!
//! ```text
//! dN2/dt = B·ρ·N1 − A·N2 − B·ρ·N2,      dN1/dt = −dN2/dt
//! ```
//!
//! with equal absorption and stimulated-emission coefficients `B`. With the
//! spectral intensity `I(ω) = c·ρ(ω)` the steady state is
//! `N2/N1 = I / (c·A/B + I)`, which equals 1/3 at the saturation intensity
//! `c·A/(2B)`.
//!
//! Unit conventions: `ρ` is the pump energy density per unit angular
//! frequency (J·s·m⁻³) and `B` is chosen so that `B·ρ` is a rate in s⁻¹;
//! intensities passed to [`steady_state_ratio`] and
//! [`fiber_power_from_intensity`] are spectral, `c·ρ`. [`geometric_power`]
//! takes a total intensity in W/m².

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Planck constant, J·s (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Tapered fiber waist diameter, m.
pub const FIBER_DIAMETER_M: f64 = 3.3e-6;
pub const PUMP_WAVELENGTH_M: f64 = 810e-9;
pub const PUMP_LINEWIDTH_M: f64 = 8.5e-9;
/// Order-of-magnitude fiber cross-section, m².
pub const APPENDIX_CROSS_SECTION_M2: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("time step {dt} s exceeds the stability limit {limit} s")]
    UnstableStep { dt: f64, limit: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EinsteinRates {
    /// Spontaneous emission rate, s⁻¹.
    pub a: f64,
    /// Absorption = stimulated emission coefficient; `B·ρ` is in s⁻¹.
    pub b: f64,
}

impl EinsteinRates {
    pub fn validate(&self) -> Result<(), RateError> {
        if self.a > 0.0 && self.b > 0.0 && self.a.is_finite() && self.b.is_finite() {
            Ok(())
        } else {
            Err(RateError::InvalidInput(format!(
                "Einstein rates must be positive, got A={}, B={}",
                self.a, self.b
            )))
        }
    }

    /// Coefficients whose ratio follows the given Planck relation at `wavelength_m`.
    pub fn from_planck(a: f64, wavelength_m: f64, convention: PlanckConvention) -> Self {
        EinsteinRates {
            a,
            b: a / convention.a_over_b(wavelength_m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub n1: f64,
    pub n2: f64,
}

impl Populations {
    pub fn total(&self) -> f64 {
        self.n1 + self.n2
    }

    pub fn ratio(&self) -> f64 {
        self.n2 / self.n1
    }
}

/// Relation between the Einstein coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanckConvention {
    /// `A/B = 4h/λ³`, the form behind the closed-form saturation power.
    #[default]
    Paper,
    /// `A/B = 8πh/λ³`.
    Standard,
}

impl PlanckConvention {
    pub fn a_over_b(self, wavelength_m: f64) -> f64 {
        let coeff = match self {
            PlanckConvention::Paper => 4.0,
            PlanckConvention::Standard => 8.0 * std::f64::consts::PI,
        };
        coeff * PLANCK / wavelength_m.powi(3)
    }
}

impl std::str::FromStr for PlanckConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(PlanckConvention::Paper),
            "standard" => Ok(PlanckConvention::Standard),
            other => Err(format!("unknown Planck convention `{other}` (expected paper or standard)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberGeometry {
    pub cross_section_m2: f64,
    pub wavelength_m: f64,
    pub linewidth_m: f64,
}

impl FiberGeometry {
    /// `S = 10⁻¹² m²`, λ = 810 nm, Δλ = 8.5 nm.
    pub fn appendix() -> Self {
        FiberGeometry {
            cross_section_m2: APPENDIX_CROSS_SECTION_M2,
            wavelength_m: PUMP_WAVELENGTH_M,
            linewidth_m: PUMP_LINEWIDTH_M,
        }
    }

    /// Cross-section of a 3.3 µm diameter waist, λ = 810 nm, Δλ = 8.5 nm.
    pub fn geometric() -> Self {
        FiberGeometry {
            cross_section_m2: circle_area(FIBER_DIAMETER_M),
            ..Self::appendix()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "appendix" => Some(Self::appendix()),
            "geometric" => Some(Self::geometric()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), RateError> {
        let fields = [
            ("cross_section_m2", self.cross_section_m2),
            ("wavelength_m", self.wavelength_m),
            ("linewidth_m", self.linewidth_m),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(RateError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self.linewidth_m > self.wavelength_m / 10.0 {
            log::warn!(
                "linewidth {} m is not small against wavelength {} m; the narrow-band power relation degrades",
                self.linewidth_m,
                self.wavelength_m
            );
        }
        Ok(())
    }

    /// Angular-frequency width `Δω = 2πcΔλ/λ²`.
    pub fn angular_bandwidth(&self) -> f64 {
        2.0 * std::f64::consts::PI * SPEED_OF_LIGHT * self.linewidth_m / (self.wavelength_m * self.wavelength_m)
    }
}

fn circle_area(diameter_m: f64) -> f64 {
    let r = 0.5 * diameter_m;
    std::f64::consts::PI * r * r
}

/// `dN2/dt` in s⁻¹; `dN1/dt` is its negative.
pub fn rate_equation_rhs(pop: &Populations, rates: &EinsteinRates, rho: f64) -> f64 {
    let b_rho = rates.b * rho;
    b_rho * pop.n1 - rates.a * pop.n2 - b_rho * pop.n2
}

/// Largest step accepted by [`evolve_populations`].
pub fn max_stable_step(rates: &EinsteinRates, rho: f64) -> f64 {
    0.1 / (rates.a + 2.0 * rates.b * rho)
}

/// Integrates the rate equation from `pop0` over `t_final` seconds with
/// classical 4th-order Runge–Kutta steps of at most `dt`.
///
/// Both populations are integrated with opposite derivatives so `N1 + N2`
/// is preserved up to rounding.
pub fn evolve_populations(
    pop0: Populations,
    rates: &EinsteinRates,
    rho: f64,
    t_final: f64,
    dt: f64,
) -> Result<Populations, RateError> {
    if !(pop0.n1 >= 0.0 && pop0.n2 >= 0.0) {
        return Err(RateError::InvalidInput("populations must be non-negative".into()));
    }
    if !(rho >= 0.0 && t_final >= 0.0 && dt > 0.0) {
        return Err(RateError::InvalidInput("need rho >= 0, t_final >= 0 and dt > 0".into()));
    }
    let limit = max_stable_step(rates, rho);
    if dt > limit * (1.0 + 1e-12) {
        return Err(RateError::UnstableStep { dt, limit });
    }
    let f = |n1: f64, n2: f64| rate_equation_rhs(&Populations { n1, n2 }, rates, rho);
    let (mut n1, mut n2) = (pop0.n1, pop0.n2);
    let steps = (t_final / dt).ceil() as u64;
    let h = if steps > 0 { t_final / steps as f64 } else { 0.0 };
    for _ in 0..steps {
        let k1 = f(n1, n2);
        let k2 = f(n1 - 0.5 * h * k1, n2 + 0.5 * h * k1);
        let k3 = f(n1 - 0.5 * h * k2, n2 + 0.5 * h * k2);
        let k4 = f(n1 - h * k3, n2 + h * k3);
        let dn2 = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        n2 += dn2;
        n1 -= dn2;
    }
    Ok(Populations { n1, n2 })
}

/// Steady-state `N2/N1 = I / (c·A/B + I)` for spectral intensity `I`.
pub fn steady_state_ratio(intensity: f64, rates: &EinsteinRates) -> f64 {
    if intensity.is_infinite() {
        return 1.0;
    }
    intensity / (SPEED_OF_LIGHT * rates.a / rates.b + intensity)
}

/// Spectral intensity at which `N2/N1 = 1/3`: `c·A/(2B)`.
pub fn saturation_intensity(rates: &EinsteinRates) -> f64 {
    SPEED_OF_LIGHT * rates.a / (2.0 * rates.b)
}

/// Pump power `P = I(ω)·Δω·S = 2πcS·I(ω)·Δλ/λ²` in W.
pub fn fiber_power_from_intensity(intensity: f64, geom: &FiberGeometry) -> f64 {
    intensity * geom.angular_bandwidth() * geom.cross_section_m2
}

/// Saturation pump power in W, `P_sat = coeff·π·h·c²·S·Δλ/λ⁵` with
/// `coeff = 4` for the default convention and `8π` for the standard one.
pub fn saturation_power(geom: &FiberGeometry, convention: PlanckConvention) -> f64 {
    let coeff = match convention {
        PlanckConvention::Paper => 4.0,
        PlanckConvention::Standard => 8.0 * std::f64::consts::PI,
    };
    coeff * std::f64::consts::PI * PLANCK * SPEED_OF_LIGHT * SPEED_OF_LIGHT * geom.cross_section_m2 * geom.linewidth_m
        / geom.wavelength_m.powi(5)
}

/// Power through a circular cross-section of `diameter_m` at total
/// intensity `intensity` (W/m²).
pub fn geometric_power(intensity: f64, diameter_m: f64) -> f64 {
    intensity * circle_area(diameter_m)
}
