//! Two-level emitter under incoherent pumping.
//!
//! The emitter alternates between the ground state, left at the absorption
//! rate `w_p`, and the excited state, left at `gamma + w_st`. A departure
//! from the excited state through spontaneous decay emits a collectible
//! photon; the stimulated branch returns the photon into the pump mode and
//! is not recorded.
//!
//! The photon stream is a renewal process, so its second-order correlation
//! is exactly
//!
//! ```text
//! g2(tau) = 1 - (1 - g2(0)) * exp(-(w_p + gamma + w_st) * tau)
//! ```
//!
//! with `g2(0) = 0` for an ideal emitter.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Channel, EventStream, PhotonRecord, TimeStamp, PS_PER_S};
use crate::random::{sample_exp, SeedTree};

/// Spontaneous decay rate for a 500 µs excited-state lifetime.
pub const DEFAULT_GAMMA_PER_S: f64 = 2.0e3;
/// Pump rate matching a 2 ns antibunching dip (`2 / w_p`).
pub const DEFAULT_W_P_PER_S: f64 = 1.0e9;

/// Channel on which emitted photons are recorded.
pub const EMISSION_CHANNEL: Channel = Channel(0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmitterError {
    #[error("invalid emitter config: {0}")]
    InvalidConfig(String),
    #[error("simulation duration must be positive and finite, got {0} s")]
    InvalidDuration(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoLevelEmitterConfig {
    #[serde(rename = "w_p_per_s")]
    pub w_p: f64,
    #[serde(rename = "gamma_per_s")]
    pub gamma: f64,
    #[serde(rename = "w_st_per_s")]
    pub w_st: f64,
    /// Residual zero-delay value used by the analytic model only.
    pub g2_0_floor: f64,
}

impl Default for TwoLevelEmitterConfig {
    fn default() -> Self {
        TwoLevelEmitterConfig {
            w_p: DEFAULT_W_P_PER_S,
            gamma: DEFAULT_GAMMA_PER_S,
            w_st: 0.0,
            g2_0_floor: 0.0,
        }
    }
}

impl TwoLevelEmitterConfig {
    pub fn new(w_p: f64, gamma: f64) -> Self {
        TwoLevelEmitterConfig {
            w_p,
            gamma,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), EmitterError> {
        for (name, v) in [("w_p_per_s", self.w_p), ("gamma_per_s", self.gamma), ("w_st_per_s", self.w_st)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(EmitterError::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.w_p + self.gamma <= 0.0 {
            return Err(EmitterError::InvalidConfig("w_p_per_s + gamma_per_s must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.g2_0_floor) {
            return Err(EmitterError::InvalidConfig(format!(
                "g2_0_floor must lie in [0, 1], got {}",
                self.g2_0_floor
            )));
        }
        Ok(())
    }

    /// Antibunching recovery rate `w_p + gamma + w_st` in s⁻¹.
    pub fn recovery_rate(&self) -> f64 {
        self.w_p + self.gamma + self.w_st
    }
}

/// Stochastic photon emission over `[0, duration_s]`, single channel 0.
///
/// The emitter starts in the ground state at t = 0. Photon times are the
/// instants of spontaneous decay, rounded to the picosecond.
pub fn simulate_two_level(
    config: &TwoLevelEmitterConfig,
    duration_s: f64,
    seed: u64,
) -> Result<EventStream, EmitterError> {
    config.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(EmitterError::InvalidDuration(duration_s));
    }
    let duration = TimeStamp::from_secs_f64(duration_s);
    let note = format!(
        "two-level emitter w_p={:e}/s gamma={:e}/s w_st={:e}/s seed={seed}",
        config.w_p, config.gamma, config.w_st
    );
    if config.w_p == 0.0 {
        warn!("w_p = 0: the emitter never leaves the ground state, stream is empty");
        return Ok(EventStream::empty(duration, [EMISSION_CHANNEL], note));
    }

    let mut rng = SeedTree::new(seed).rng("emitter");
    let w_p = config.w_p / PS_PER_S;
    let leave_excited = (config.gamma + config.w_st) / PS_PER_S;
    let p_spontaneous = if config.gamma + config.w_st > 0.0 {
        config.gamma / (config.gamma + config.w_st)
    } else {
        0.0
    };
    let end = duration.as_ps() as f64;
    let expected = expected_emission_rate(config) * duration_s;
    let mut records = Vec::with_capacity((expected * 1.01) as usize + 16);

    let mut t = 0.0_f64;
    loop {
        t += sample_exp(&mut rng, w_p);
        if leave_excited == 0.0 || t > end {
            break;
        }
        t += sample_exp(&mut rng, leave_excited);
        if t > end {
            break;
        }
        // with w_st = 0 every decay is spontaneous and no draw is spent
        let spontaneous = config.w_st == 0.0 || rand::Rng::random::<f64>(&mut rng) < p_spontaneous;
        if spontaneous {
            let ps = t.round().min(end);
            records.push(PhotonRecord::new(TimeStamp(ps as u64), EMISSION_CHANNEL));
        }
    }
    Ok(EventStream::from_parts_unchecked(
        records,
        duration,
        [EMISSION_CHANNEL],
        note,
    ))
}

/// Analytic second-order correlation at delay `tau_s` (seconds, ≥ 0).
pub fn analytic_g2(config: &TwoLevelEmitterConfig, tau_s: f64) -> f64 {
    1.0 - (1.0 - config.g2_0_floor) * (-config.recovery_rate() * tau_s.abs()).exp()
}

/// Steady-state spontaneous emission rate `gamma · N2` in photons/s.
pub fn expected_emission_rate(config: &TwoLevelEmitterConfig) -> f64 {
    let total = config.recovery_rate();
    if total <= 0.0 {
        return 0.0;
    }
    if config.w_p.is_infinite() {
        return config.gamma;
    }
    config.gamma * config.w_p / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::poisson_process;

    #[test]
    fn zero_pump_gives_empty_stream() {
        let cfg = TwoLevelEmitterConfig::new(0.0, 1e6);
        let s = simulate_two_level(&cfg, 1e-3, 1).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.duration(), TimeStamp::from_secs_f64(1e-3));
    }

    #[test]
    fn rejects_bad_duration_and_config() {
        let cfg = TwoLevelEmitterConfig::default();
        assert!(matches!(
            simulate_two_level(&cfg, 0.0, 1),
            Err(EmitterError::InvalidDuration(_))
        ));
        assert!(matches!(
            simulate_two_level(&cfg, f64::NAN, 1),
            Err(EmitterError::InvalidDuration(_))
        ));
        let bad = TwoLevelEmitterConfig { gamma: -1.0, ..cfg };
        assert!(bad.validate().is_err());
        let bad = TwoLevelEmitterConfig { g2_0_floor: 1.5, ..cfg };
        assert!(bad.validate().is_err());
        assert!(TwoLevelEmitterConfig::new(0.0, 0.0).validate().is_err());
    }

    #[test]
    fn mean_rate_matches_renewal_cycle() {
        let cfg = TwoLevelEmitterConfig::new(1e9, 1e8);
        let s = simulate_two_level(&cfg, 10e-3, 42).unwrap();
        let expected: f64 = 1e9 * 1e8 / (1e9 + 1e8) * 10e-3;
        assert!((expected - 9.0909e5).abs() < 1e1);
        assert!((s.len() as f64 - expected).abs() < 5.0 * expected.sqrt());
        assert!(crate::model::validate_stream(s).is_ok());
    }

    #[test]
    fn stimulated_branch_removes_photons() {
        let cfg = TwoLevelEmitterConfig {
            w_st: 3e8,
            ..TwoLevelEmitterConfig::new(1e9, 1e8)
        };
        let s = simulate_two_level(&cfg, 5e-3, 5).unwrap();
        let expected = expected_emission_rate(&cfg) * 5e-3;
        assert!((s.len() as f64 - expected).abs() < 5.0 * expected.sqrt());
    }

    #[test]
    fn short_gaps_are_suppressed_relative_to_poisson() {
        let cfg = TwoLevelEmitterConfig::new(2e8, 5e7);
        let duration_s = 20e-3;
        let s = simulate_two_level(&cfg, duration_s, 9).unwrap();
        let threshold = 0.1 / cfg.recovery_rate() * PS_PER_S;
        let short_fraction = |times: &[u64]| {
            let short = times
                .windows(2)
                .filter(|w| ((w[1] - w[0]) as f64) < threshold)
                .count();
            short as f64 / (times.len().max(2) - 1) as f64
        };
        let emitter = short_fraction(&s.times_on(EMISSION_CHANNEL));
        let rate = s.len() as f64 / duration_s;
        let poisson = poisson_process(
            rate,
            s.duration(),
            EMISSION_CHANNEL,
            &mut SeedTree::new(9).rng("reference"),
        );
        let poisson_times: Vec<u64> = poisson.iter().map(|r| r.t.as_ps()).collect();
        let reference = short_fraction(&poisson_times);
        assert!(reference > 0.0);
        assert!(emitter < 0.5 * reference, "emitter {emitter} vs poisson {reference}");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = TwoLevelEmitterConfig::new(1e9, 1e8);
        let a = simulate_two_level(&cfg, 1e-4, 3).unwrap();
        let b = simulate_two_level(&cfg, 1e-4, 3).unwrap();
        let c = simulate_two_level(&cfg, 1e-4, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.records(), c.records());
    }

    #[test]
    fn analytic_g2_values() {
        let cfg = TwoLevelEmitterConfig::new(1e9, 5e8);
        let k = cfg.recovery_rate();
        assert_eq!(analytic_g2(&cfg, 0.0), 0.0);
        assert!((analytic_g2(&cfg, 100.0 / k) - 1.0).abs() < 1e-6);
        assert!((analytic_g2(&cfg, std::f64::consts::LN_2 / k) - 0.5).abs() < 1e-15);
        let floored = TwoLevelEmitterConfig { g2_0_floor: 0.21, ..cfg };
        assert!((analytic_g2(&floored, 0.0) - 0.21).abs() < 1e-15);
    }

    #[test]
    fn emission_rate_limits() {
        assert_eq!(expected_emission_rate(&TwoLevelEmitterConfig::new(0.0, 1e6)), 0.0);
        assert_eq!(expected_emission_rate(&TwoLevelEmitterConfig::new(1e6, 1e6)), 5e5);
        let saturated = TwoLevelEmitterConfig::new(f64::INFINITY, 2e3);
        assert_eq!(expected_emission_rate(&saturated), 2e3);
        let nearly = TwoLevelEmitterConfig::new(1e15, 2e3);
        assert!((expected_emission_rate(&nearly) - 2e3).abs() < 1e-6);
    }
}
