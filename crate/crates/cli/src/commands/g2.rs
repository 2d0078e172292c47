use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use photonlab::correlation::{histogram, normalize_g2, write_g2_csv, HistogramMeta};
use photonlab::fit::{fit_g2, Estimate, G2Fit, G2FitOptions};
use photonlab::model::io::read_stream;
use photonlab::Channel;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::gnuplot;
use crate::output::{ensure_dir, file_name, write_json, write_text, Report, Written};

pub const HISTOGRAM_FILE: &str = "g2_histogram.csv";

#[derive(Debug, Clone, Serialize)]
pub struct G2Summary {
    pub input_file: String,
    pub histogram_file: String,
    pub histogram: HistogramMeta,
    /// Expected counts per bin for uncorrelated light.
    pub accidentals_per_bin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct G2FitSummary {
    pub fit: G2Fit,
    pub dip_width_ns: Option<Estimate>,
    pub verdict: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct G2Results {
    pub summary: G2Summary,
    pub fit: G2FitSummary,
}

/// Histogram, normalize and fit the stream at `input`.
pub fn cmd_g2(
    cfg: &PipelineConfig,
    input: &Path,
    out: &Path,
    gnuplot_stub: bool,
) -> Result<Written<G2Results>, CliError> {
    cfg.validate()?;
    let stream = read_stream(input)?;
    let hist = histogram(&stream, Channel::START, Channel::STOP, &cfg.histogram.binning(), cfg.histogram.mode)?;
    let est = normalize_g2(&hist)?;
    let fit = fit_g2(&est, None, G2FitOptions::default())?;

    ensure_dir(out)?;
    let csv_path = out.join(HISTOGRAM_FILE);
    let f = File::create(&csv_path).map_err(|source| CliError::Io {
        path: csv_path.clone(),
        source,
    })?;
    write_g2_csv(&est, BufWriter::new(f)).map_err(|source| CliError::Io {
        path: csv_path.clone(),
        source,
    })?;

    let accidentals = hist.n_start as f64 * hist.n_stop as f64 / hist.duration.as_ps() as f64 * hist.bin_width_ps as f64;
    let summary = G2Summary {
        input_file: file_name(input),
        histogram_file: HISTOGRAM_FILE.into(),
        histogram: HistogramMeta::from(&hist),
        accidentals_per_bin: accidentals,
    };
    let verdict = if fit.single_emitter_verdict {
        "single emitter: g2(0) + sigma below 0.5"
    } else {
        "not demonstrated: g2(0) + sigma not below 0.5"
    };
    let fit_summary = G2FitSummary {
        dip_width_ns: fit.dip_width_s.map(|d| Estimate::new(d.value * 1e9, d.std_error * 1e9)),
        verdict,
        fit,
    };
    let mut files = vec![csv_path];
    files.push(write_json(&out.join("g2.json"), &Report::new("g2", cfg, &summary))?);
    files.push(write_json(&out.join("g2_fit.json"), &Report::new("g2", cfg, &fit_summary))?);
    if gnuplot_stub {
        files.push(write_text(&out.join("g2.gp"), &gnuplot::g2_script(HISTOGRAM_FILE, &fit_summary.fit))?);
    }
    let converged = fit_summary.fit.report.converged;
    let n_iter = fit_summary.fit.report.n_iter;
    let written = Written {
        files,
        results: G2Results {
            summary,
            fit: fit_summary,
        },
    };
    if !converged {
        return Err(CliError::NotConverged { what: "g2", n_iter });
    }
    Ok(written)
}
