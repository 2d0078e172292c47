use std::collections::BTreeMap;
use std::path::Path;

use photonlab::detection::{add_background, apply_detectors, split_hbt};
use photonlab::emitter::{expected_emission_rate, simulate_two_level};
use photonlab::model::io::write_stream;
use photonlab::random::SeedTree;
use photonlab::{Channel, EventStream};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, write_json, Report, Written};

pub const EMITTED_FILE: &str = "emitted.csv";
pub const DETECTED_FILE: &str = "detected.csv";

/// Emitted (channel 0) and detected (channels 0 and 1) streams.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedStreams {
    pub emitted: EventStream,
    pub detected: EventStream,
}

/// emitter → background → 50:50 split → per-channel detectors.
///
/// Each stage draws from its own branch of the seed tree.
pub fn simulate_pipeline(cfg: &PipelineConfig) -> Result<SimulatedStreams, CliError> {
    cfg.validate()?;
    let seeds = SeedTree::new(cfg.seed);
    let emitted = simulate_two_level(&cfg.emitter, cfg.duration_s, seeds.child("emitter").seed())?;
    let collected = add_background(&emitted, &cfg.background, seeds.child("background").seed())?;
    let split = split_hbt(&collected, &cfg.splitter, seeds.child("splitter").seed())?;
    let detectors: BTreeMap<Channel, _> =
        [(Channel::START, cfg.detectors[0]), (Channel::STOP, cfg.detectors[1])].into();
    let detected = apply_detectors(&split, &detectors, seeds.child("detector").seed())?;
    Ok(SimulatedStreams { emitted, detected })
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateResults {
    pub emitted_file: String,
    pub detected_file: String,
    pub duration_ps: u64,
    pub emitted_photons: usize,
    pub expected_emission_rate_per_s: f64,
    pub emission_rate_per_s: f64,
    pub detected_counts: [usize; 2],
    pub detected_rate_per_s: [f64; 2],
}

pub fn cmd_simulate(cfg: &PipelineConfig, out: &Path) -> Result<Written<SimulateResults>, CliError> {
    let streams = simulate_pipeline(cfg)?;
    ensure_dir(out)?;
    let emitted_path = out.join(EMITTED_FILE);
    let detected_path = out.join(DETECTED_FILE);
    write_stream(&streams.emitted, &emitted_path)?;
    write_stream(&streams.detected, &detected_path)?;

    let d = &streams.detected;
    let results = SimulateResults {
        emitted_file: EMITTED_FILE.into(),
        detected_file: DETECTED_FILE.into(),
        duration_ps: d.duration().as_ps(),
        emitted_photons: streams.emitted.len(),
        expected_emission_rate_per_s: expected_emission_rate(&cfg.emitter),
        emission_rate_per_s: streams.emitted.rate_on(Channel(0)),
        detected_counts: [d.count_on(Channel::START), d.count_on(Channel::STOP)],
        detected_rate_per_s: [d.rate_on(Channel::START), d.rate_on(Channel::STOP)],
    };
    let report = write_json(&out.join("simulate.json"), &Report::new("simulate", cfg, &results))?;
    Ok(Written {
        files: vec![
            emitted_path.clone(),
            emitted_path.with_extension("json"),
            detected_path.clone(),
            detected_path.with_extension("json"),
            report,
        ],
        results,
    })
}
