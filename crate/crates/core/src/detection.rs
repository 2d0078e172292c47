//! Detection chain: HBT beam splitter, pump-scatter background and
//! single-photon detector imperfections.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{merge_streams, Channel, EventStream, PhotonRecord, TimeStamp};
use crate::random::{poisson_process, SeedTree, SimRng};

/// Gaussian timing jitter whose FWHM is about 1 ns.
pub const DEFAULT_JITTER_SIGMA_PS: f64 = 420.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("beam splitter expects a single-channel stream, got channels {0:?}")]
    MultiChannelInput(Vec<u8>),
    #[error("invalid detection config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub efficiency: f64,
    /// Non-paralyzable dead time.
    pub dead_time_ps: u64,
    pub jitter_sigma_ps: f64,
    pub dark_rate_per_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            efficiency: 1.0,
            dead_time_ps: 0,
            jitter_sigma_ps: DEFAULT_JITTER_SIGMA_PS,
            dark_rate_per_s: 0.0,
        }
    }
}

impl DetectorConfig {
    /// Perfect detector: unit efficiency, no darks, jitter or dead time.
    pub fn ideal() -> Self {
        DetectorConfig {
            efficiency: 1.0,
            dead_time_ps: 0,
            jitter_sigma_ps: 0.0,
            dark_rate_per_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(DetectionError::InvalidConfig(format!(
                "efficiency must lie in [0, 1], got {}",
                self.efficiency
            )));
        }
        if !(self.jitter_sigma_ps.is_finite() && self.jitter_sigma_ps >= 0.0) {
            return Err(DetectionError::InvalidConfig(format!(
                "jitter_sigma_ps must be >= 0, got {}",
                self.jitter_sigma_ps
            )));
        }
        if !(self.dark_rate_per_s.is_finite() && self.dark_rate_per_s >= 0.0) {
            return Err(DetectionError::InvalidConfig(format!(
                "dark_rate_per_s must be >= 0, got {}",
                self.dark_rate_per_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitterConfig {
    /// Probability that a photon is routed to channel 0.
    pub transmit_prob: f64,
}

impl Default for SplitterConfig {
    fn default() -> Self {
        SplitterConfig { transmit_prob: 0.5 }
    }
}

impl SplitterConfig {
    pub fn validate(&self) -> Result<(), DetectionError> {
        if (0.0..=1.0).contains(&self.transmit_prob) {
            Ok(())
        } else {
            Err(DetectionError::InvalidConfig(format!(
                "transmit_prob must lie in [0, 1], got {}",
                self.transmit_prob
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundConfig {
    /// Pump-scatter photons per second and per channel.
    #[serde(rename = "background_rate_per_s")]
    pub rate: f64,
}

impl BackgroundConfig {
    pub fn validate(&self) -> Result<(), DetectionError> {
        if self.rate.is_finite() && self.rate >= 0.0 {
            Ok(())
        } else {
            Err(DetectionError::InvalidConfig(format!(
                "background_rate_per_s must be >= 0, got {}",
                self.rate
            )))
        }
    }
}

/// Routes each photon of a single-channel stream to channel 0 with
/// `transmit_prob`, otherwise to channel 1.
pub fn split_hbt(
    stream: &EventStream,
    cfg: &SplitterConfig,
    seed: u64,
) -> Result<EventStream, DetectionError> {
    cfg.validate()?;
    if stream.channels().len() != 1 {
        return Err(DetectionError::MultiChannelInput(
            stream.channels().iter().map(|c| c.0).collect(),
        ));
    }
    let mut rng = SeedTree::new(seed).rng("splitter");
    let records = stream
        .records()
        .iter()
        .map(|r| {
            let to_start = rng.random::<f64>() < cfg.transmit_prob;
            PhotonRecord::new(r.t, if to_start { Channel::START } else { Channel::STOP })
        })
        .collect();
    Ok(EventStream::from_parts_unchecked(
        records,
        stream.duration(),
        [Channel::START, Channel::STOP],
        format!("{} | hbt split p0={}", stream.origin_note(), cfg.transmit_prob),
    ))
}

/// Superimposes an independent Poisson process of `cfg.rate` on every
/// channel of the stream.
pub fn add_background(
    stream: &EventStream,
    cfg: &BackgroundConfig,
    seed: u64,
) -> Result<EventStream, DetectionError> {
    cfg.validate()?;
    if cfg.rate == 0.0 {
        return Ok(stream.clone());
    }
    let seeds = SeedTree::new(seed).child("background");
    let mut out = stream.clone();
    for &ch in stream.channels() {
        let mut rng = seeds.rng(&ch.0.to_string());
        let bg = EventStream::from_parts_unchecked(
            poisson_process(cfg.rate, stream.duration(), ch, &mut rng),
            stream.duration(),
            [ch],
            String::new(),
        );
        out = merge_streams(&out, &bg).expect("equal durations");
    }
    Ok(out.with_origin_note(format!(
        "{} | background {:e}/s",
        stream.origin_note(),
        cfg.rate
    )))
}

/// Applies the same detector model to every channel of the stream.
pub fn apply_detector(
    stream: &EventStream,
    cfg: &DetectorConfig,
    seed: u64,
) -> Result<EventStream, DetectionError> {
    let per_channel: BTreeMap<Channel, DetectorConfig> =
        stream.channels().iter().map(|&c| (c, *cfg)).collect();
    apply_detectors(stream, &per_channel, seed)
}

/// Applies one detector model per channel. Channels without an entry pass
/// through untouched.
///
/// Per channel, in order: Bernoulli thinning by efficiency, dark counts,
/// Gaussian jitter (records pushed outside `[0, duration]` are lost),
/// re-sort, then non-paralyzable dead time.
pub fn apply_detectors(
    stream: &EventStream,
    configs: &BTreeMap<Channel, DetectorConfig>,
    seed: u64,
) -> Result<EventStream, DetectionError> {
    for cfg in configs.values() {
        cfg.validate()?;
    }
    let seeds = SeedTree::new(seed).child("detector");
    let channels: Vec<Channel> = stream.channels().iter().copied().collect();
    let duration = stream.duration();
    let per_channel: Vec<Vec<PhotonRecord>> = channels
        .par_iter()
        .map(|&ch| {
            let times = stream.times_on(ch);
            match configs.get(&ch) {
                Some(cfg) => {
                    let mut rng = seeds.rng(&ch.0.to_string());
                    detect_channel(&times, cfg, duration, &mut rng)
                        .into_iter()
                        .map(|t| PhotonRecord::new(TimeStamp(t), ch))
                        .collect()
                }
                None => times
                    .into_iter()
                    .map(|t| PhotonRecord::new(TimeStamp(t), ch))
                    .collect(),
            }
        })
        .collect();

    let mut records: Vec<PhotonRecord> = per_channel.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.t, r.channel));
    Ok(EventStream::from_parts_unchecked(
        records,
        duration,
        channels,
        format!("{} | detected", stream.origin_note()),
    ))
}

fn detect_channel(times: &[u64], cfg: &DetectorConfig, duration: TimeStamp, rng: &mut SimRng) -> Vec<u64> {
    let mut kept: Vec<u64> = if cfg.efficiency >= 1.0 {
        times.to_vec()
    } else {
        times
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() < cfg.efficiency)
            .collect()
    };

    if cfg.dark_rate_per_s > 0.0 {
        kept.extend(
            poisson_process(cfg.dark_rate_per_s, duration, Channel(0), rng)
                .into_iter()
                .map(|r| r.t.as_ps()),
        );
    }

    if cfg.jitter_sigma_ps > 0.0 {
        let normal = Normal::new(0.0, cfg.jitter_sigma_ps).expect("validated sigma");
        let end = duration.as_ps() as f64;
        kept = kept
            .into_iter()
            .filter_map(|t| {
                let jittered = (t as f64 + normal.sample(rng)).round();
                (jittered >= 0.0 && jittered <= end).then_some(jittered as u64)
            })
            .collect();
    }

    kept.sort_unstable();

    if cfg.dead_time_ps > 0 {
        let mut last: Option<u64> = None;
        kept.retain(|&t| match last {
            Some(prev) if t - prev < cfg.dead_time_ps => false,
            _ => {
                last = Some(t);
                true
            }
        });
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_stream;

    fn single_channel(times_ps: &[u64], duration: TimeStamp) -> EventStream {
        EventStream::new(
            times_ps
                .iter()
                .map(|&t| PhotonRecord::new(TimeStamp(t), Channel(0)))
                .collect(),
            duration,
            [Channel(0)],
            "test",
        )
        .unwrap()
    }

    fn uniform_stream(n: u64, spacing_ps: u64) -> EventStream {
        let times: Vec<u64> = (0..n).map(|i| i * spacing_ps).collect();
        single_channel(&times, TimeStamp(n * spacing_ps))
    }

    #[test]
    fn split_all_to_start() {
        let s = uniform_stream(1000, 1000);
        let out = split_hbt(&s, &SplitterConfig { transmit_prob: 1.0 }, 1).unwrap();
        assert_eq!(out.count_on(Channel(0)), 1000);
        assert_eq!(out.count_on(Channel(1)), 0);
        assert_eq!(out.channels().len(), 2);
    }

    #[test]
    fn split_balanced_is_binomial() {
        let n = 1_000_000u64;
        let s = uniform_stream(n, 10);
        let out = split_hbt(&s, &SplitterConfig::default(), 2).unwrap();
        let c0 = out.count_on(Channel(0)) as f64;
        let sd = (n as f64 * 0.25).sqrt();
        assert!((c0 - 0.5 * n as f64).abs() < 5.0 * sd);
        assert_eq!(out.len() as u64, n);
        assert!(validate_stream(out).is_ok());
    }

    #[test]
    fn split_empty_and_multichannel() {
        let e = EventStream::empty(TimeStamp(100), [Channel(0)], "");
        let out = split_hbt(&e, &SplitterConfig::default(), 0).unwrap();
        assert!(out.is_empty());
        assert!(out.has_channel(Channel(0)) && out.has_channel(Channel(1)));
        let two = EventStream::empty(TimeStamp(100), [Channel(0), Channel(1)], "");
        assert!(matches!(
            split_hbt(&two, &SplitterConfig::default(), 0),
            Err(DetectionError::MultiChannelInput(_))
        ));
        assert!(split_hbt(&e, &SplitterConfig { transmit_prob: 1.2 }, 0).is_err());
    }

    #[test]
    fn background_zero_rate_is_identity() {
        let s = uniform_stream(10, 100);
        assert_eq!(add_background(&s, &BackgroundConfig { rate: 0.0 }, 3).unwrap(), s);
    }

    #[test]
    fn background_count_is_poisson() {
        let e = EventStream::empty(TimeStamp::from_secs_f64(1.0), [Channel(0)], "");
        let out = add_background(&e, &BackgroundConfig { rate: 1e5 }, 4).unwrap();
        assert!((out.len() as f64 - 1e5).abs() < 5.0 * 1e5_f64.sqrt());
        assert!(validate_stream(out).is_ok());
    }

    #[test]
    fn ideal_detector_is_identity() {
        let s = uniform_stream(1000, 777);
        let out = apply_detector(&s, &DetectorConfig::ideal(), 5).unwrap();
        assert_eq!(out.records(), s.records());
    }

    #[test]
    fn dead_time_drops_close_record() {
        let s = single_channel(&[1_000, 1_010], TimeStamp(10_000));
        let cfg = DetectorConfig {
            dead_time_ps: 1_000,
            ..DetectorConfig::ideal()
        };
        let out = apply_detector(&s, &cfg, 0).unwrap();
        assert_eq!(out.times_on(Channel(0)), vec![1_000]);
    }

    #[test]
    fn dead_time_is_non_paralyzable() {
        // the dropped record at 900 does not extend the dead period
        let s = single_channel(&[0, 900, 1_000, 1_500], TimeStamp(10_000));
        let cfg = DetectorConfig {
            dead_time_ps: 1_000,
            ..DetectorConfig::ideal()
        };
        let out = apply_detector(&s, &cfg, 0).unwrap();
        assert_eq!(out.times_on(Channel(0)), vec![0, 1_000]);
    }

    #[test]
    fn efficiency_thinning_is_binomial() {
        let n = 1_000_000u64;
        let s = uniform_stream(n, 10);
        let cfg = DetectorConfig {
            efficiency: 0.3,
            ..DetectorConfig::ideal()
        };
        let out = apply_detector(&s, &cfg, 6).unwrap();
        let sd = (n as f64 * 0.3 * 0.7).sqrt();
        assert!((out.len() as f64 - 3e5).abs() < 5.0 * sd);
    }

    #[test]
    fn full_detector_output_is_valid_and_respects_dead_time() {
        let duration = TimeStamp::from_secs_f64(1e-3);
        let mut rng = SeedTree::new(8).rng("src");
        let src = EventStream::new(
            poisson_process(5e7, duration, Channel(0), &mut rng),
            duration,
            [Channel(0)],
            "",
        )
        .unwrap();
        let split = split_hbt(&src, &SplitterConfig::default(), 8).unwrap();
        let cfg = DetectorConfig {
            efficiency: 0.6,
            dead_time_ps: 22_000,
            jitter_sigma_ps: 420.0,
            dark_rate_per_s: 1e5,
        };
        let out = apply_detector(&split, &cfg, 8).unwrap();
        let out = validate_stream(out).unwrap();
        for ch in [Channel(0), Channel(1)] {
            let t = out.times_on(ch);
            assert!(t.windows(2).all(|w| w[1] - w[0] >= 22_000));
        }
    }

    #[test]
    fn jittered_records_stay_in_range() {
        let s = single_channel(&[0, 1, 2, 9_998, 9_999, 10_000], TimeStamp(10_000));
        let cfg = DetectorConfig {
            jitter_sigma_ps: 5_000.0,
            ..DetectorConfig::ideal()
        };
        let out = apply_detector(&s, &cfg, 1).unwrap();
        assert!(out.len() <= 6);
        assert!(validate_stream(out).is_ok());
    }

    #[test]
    fn detector_validation() {
        let s = uniform_stream(3, 10);
        let bad = DetectorConfig {
            efficiency: -0.1,
            ..DetectorConfig::ideal()
        };
        assert!(apply_detector(&s, &bad, 0).is_err());
    }
}
