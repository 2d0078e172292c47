//! Coincidence histograms and g²(τ) estimation from two-channel streams.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::histogram::bin_index;
use crate::model::{Channel, CoincidenceHistogram, EventStream, HistogramMode, PS_PER_S};

/// Coincidence window of the TAC emulation, 100 ns.
pub const DEFAULT_TAU_MAX_PS: i64 = 100_000;
pub const DEFAULT_BIN_WIDTH_PS: u64 = 100;

/// Starts per parallel chunk.
const CHUNK: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error("channel {0} is not declared by the stream")]
    MissingChannel(Channel),
    #[error("bad binning: bin width {bin_width_ps} ps over [{tau_min_ps}, {tau_max_ps}) ps")]
    BadBinning {
        bin_width_ps: u64,
        tau_min_ps: i64,
        tau_max_ps: i64,
    },
    #[error("histogram duration is zero")]
    ZeroDuration,
    #[error("histogram has no start or no stop events (n_start={n_start}, n_stop={n_stop})")]
    NoEvents { n_start: u64, n_stop: u64 },
}

/// Delay binning: `[tau_min_ps, tau_max_ps)` in bins of `bin_width_ps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binning {
    pub bin_width_ps: u64,
    pub tau_min_ps: i64,
    pub tau_max_ps: i64,
}

impl Binning {
    /// Non-negative delays `[0, tau_max_ps)`.
    pub fn forward(bin_width_ps: u64, tau_max_ps: i64) -> Self {
        Binning {
            bin_width_ps,
            tau_min_ps: 0,
            tau_max_ps,
        }
    }

    /// Signed delays `[-tau_max_ps, tau_max_ps)`.
    pub fn symmetric(bin_width_ps: u64, tau_max_ps: i64) -> Self {
        Binning {
            bin_width_ps,
            tau_min_ps: -tau_max_ps,
            tau_max_ps,
        }
    }

    fn n_bins(&self) -> Result<usize, CorrelationError> {
        CoincidenceHistogram::bin_count(self.bin_width_ps, self.tau_min_ps, self.tau_max_ps)
            .filter(|&n| n > 0)
            .ok_or(CorrelationError::BadBinning {
                bin_width_ps: self.bin_width_ps,
                tau_min_ps: self.tau_min_ps,
                tau_max_ps: self.tau_max_ps,
            })
    }

    /// Upper edge of the last bin relative to zero delay.
    fn reach(&self, n_bins: usize) -> i64 {
        self.tau_min_ps + (n_bins as u64 * self.bin_width_ps) as i64
    }
}

impl Default for Binning {
    fn default() -> Self {
        Binning::forward(DEFAULT_BIN_WIDTH_PS, DEFAULT_TAU_MAX_PS)
    }
}

/// Normalized g²(τ) with per-bin 1σ uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub tau_centers_ps: Vec<f64>,
    pub g2: Vec<f64>,
    pub sigma: Vec<f64>,
    pub histogram: CoincidenceHistogram,
}

/// Uncertainty assigned to bins without counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmptyBinSigma {
    /// One count, so weighted fits stay defined.
    #[default]
    OneCount,
    Zero,
}

fn channel_times(
    stream: &EventStream,
    start_ch: Channel,
    stop_ch: Channel,
) -> Result<(Vec<u64>, Vec<u64>), CorrelationError> {
    for ch in [start_ch, stop_ch] {
        if !stream.has_channel(ch) {
            return Err(CorrelationError::MissingChannel(ch));
        }
    }
    Ok((stream.times_on(start_ch), stream.times_on(stop_ch)))
}

fn empty_histogram(
    n_bins: usize,
    binning: &Binning,
    n_start: usize,
    n_stop: usize,
    stream: &EventStream,
    mode: HistogramMode,
) -> CoincidenceHistogram {
    CoincidenceHistogram {
        bin_width_ps: binning.bin_width_ps,
        tau_min_ps: binning.tau_min_ps,
        tau_max_ps: binning.tau_max_ps,
        counts: vec![0; n_bins],
        n_start: n_start as u64,
        n_stop: n_stop as u64,
        duration: stream.duration(),
        mode,
    }
}

/// Sums per-chunk partial histograms; the result does not depend on the
/// chunking.
fn accumulate<F>(starts: &[u64], n_bins: usize, per_start: F) -> Vec<u64>
where
    F: Fn(u64, &mut [u64]) + Sync,
{
    starts
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut partial = vec![0u64; n_bins];
            for &t in chunk {
                per_start(t, &mut partial);
            }
            partial
        })
        .reduce(
            || vec![0u64; n_bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

/// First index of `xs` whose value is `>= bound`. Negative bounds map to 0.
fn lower_bound(xs: &[u64], bound: i64) -> usize {
    if bound <= 0 {
        0
    } else {
        xs.partition_point(|&x| x < bound as u64)
    }
}

/// TAC emulation over non-negative delays: each start is paired with the
/// first stop at delay `>= 0` and counted if that delay is in the window.
fn start_stop_forward(starts: &[u64], stops: &[u64], binning: &Binning, n_bins: usize) -> Vec<u64> {
    let reach = binning.reach(n_bins);
    accumulate(starts, n_bins, |t, hist| {
        let i = stops.partition_point(|&s| s < t);
        if let Some(&s) = stops.get(i) {
            let delay = (s - t) as i64;
            if delay < reach {
                if let Some(k) = bin_index(delay, binning.tau_min_ps, binning.bin_width_ps, n_bins) {
                    hist[k] += 1;
                }
            }
        }
    })
}

/// Start–stop histogram: for every start record the first stop record with
/// delay in `[0, tau_max)` is counted; starts with no stop in the window
/// contribute nothing.
///
/// A negative `tau_min_ps` adds the mirrored TAC measurement with the roles
/// of the two channels swapped, binned at negative delay.
pub fn histogram_start_stop(
    stream: &EventStream,
    start_ch: Channel,
    stop_ch: Channel,
    binning: &Binning,
) -> Result<CoincidenceHistogram, CorrelationError> {
    let n_bins = binning.n_bins()?;
    let (starts, stops) = channel_times(stream, start_ch, stop_ch)?;
    let mut hist = empty_histogram(n_bins, binning, starts.len(), stops.len(), stream, HistogramMode::StartStop);

    hist.counts = start_stop_forward(&starts, &stops, binning, n_bins);
    if binning.tau_min_ps < 0 {
        // swapped roles; strictly positive delays so that zero delay is
        // only counted by the forward pass
        let swapped = accumulate(&stops, n_bins, |t, h| {
            let i = starts.partition_point(|&s| s <= t);
            if let Some(&s) = starts.get(i) {
                let signed = -((s - t) as i64);
                if let Some(k) = bin_index(signed, binning.tau_min_ps, binning.bin_width_ps, n_bins) {
                    h[k] += 1;
                }
            }
        });
        hist.counts.iter_mut().zip(swapped).for_each(|(a, b)| *a += b);
    }
    Ok(hist)
}

/// All-pairs histogram: every ordered (start, stop) pair whose signed delay
/// `t_stop - t_start` lies in the window is counted.
pub fn histogram_all_pairs(
    stream: &EventStream,
    start_ch: Channel,
    stop_ch: Channel,
    binning: &Binning,
) -> Result<CoincidenceHistogram, CorrelationError> {
    let n_bins = binning.n_bins()?;
    let (starts, stops) = channel_times(stream, start_ch, stop_ch)?;
    let mut hist = empty_histogram(n_bins, binning, starts.len(), stops.len(), stream, HistogramMode::AllPairs);
    let reach = binning.reach(n_bins);
    hist.counts = accumulate(&starts, n_bins, |t, h| {
        let lo = lower_bound(&stops, t as i64 + binning.tau_min_ps);
        for &s in &stops[lo..] {
            let delay = s as i64 - t as i64;
            if delay >= reach {
                break;
            }
            if let Some(k) = bin_index(delay, binning.tau_min_ps, binning.bin_width_ps, n_bins) {
                h[k] += 1;
            }
        }
    });
    Ok(hist)
}

pub fn histogram(
    stream: &EventStream,
    start_ch: Channel,
    stop_ch: Channel,
    binning: &Binning,
    mode: HistogramMode,
) -> Result<CoincidenceHistogram, CorrelationError> {
    match mode {
        HistogramMode::StartStop => histogram_start_stop(stream, start_ch, stop_ch, binning),
        HistogramMode::AllPairs => histogram_all_pairs(stream, start_ch, stop_ch, binning),
    }
}

/// Normalizes a histogram by the accidental-coincidence level
/// `n_start · (n_stop / T) · Δτ` measured from the histogram itself.
pub fn normalize_g2(hist: &CoincidenceHistogram) -> Result<G2Estimate, CorrelationError> {
    normalize_g2_with(hist, EmptyBinSigma::OneCount)
}

pub fn normalize_g2_with(
    hist: &CoincidenceHistogram,
    empty: EmptyBinSigma,
) -> Result<G2Estimate, CorrelationError> {
    let duration_s = hist.duration.as_secs_f64();
    if duration_s <= 0.0 {
        return Err(CorrelationError::ZeroDuration);
    }
    if hist.n_start == 0 || hist.n_stop == 0 {
        return Err(CorrelationError::NoEvents {
            n_start: hist.n_start,
            n_stop: hist.n_stop,
        });
    }
    let accidental =
        hist.n_start as f64 * (hist.n_stop as f64 / duration_s) * (hist.bin_width_ps as f64 / PS_PER_S);
    let g2 = hist.counts.iter().map(|&c| c as f64 / accidental).collect();
    let sigma = hist
        .counts
        .iter()
        .map(|&c| {
            let c = match (c, empty) {
                (0, EmptyBinSigma::OneCount) => 1.0,
                (c, _) => c as f64,
            };
            c.sqrt() / accidental
        })
        .collect();
    Ok(G2Estimate {
        tau_centers_ps: hist.bin_centers_ps(),
        g2,
        sigma,
        histogram: hist.clone(),
    })
}

/// CSV rows `tau_ps,counts,g2,sigma`.
pub fn write_g2_csv<W: std::io::Write>(est: &G2Estimate, mut w: W) -> std::io::Result<()> {
    writeln!(w, "tau_ps,counts,g2,sigma")?;
    for k in 0..est.g2.len() {
        writeln!(
            w,
            "{},{},{},{}",
            est.tau_centers_ps[k], est.histogram.counts[k], est.g2[k], est.sigma[k]
        )?;
    }
    w.flush()
}

/// Histogram metadata for the JSON sidecar of a g² CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramMeta {
    pub mode: HistogramMode,
    pub bin_width_ps: u64,
    pub tau_min_ps: i64,
    pub tau_max_ps: i64,
    pub n_bins: usize,
    pub n_start: u64,
    pub n_stop: u64,
    pub duration_ps: u64,
    pub total_counts: u64,
}

impl From<&CoincidenceHistogram> for HistogramMeta {
    fn from(h: &CoincidenceHistogram) -> Self {
        HistogramMeta {
            mode: h.mode,
            bin_width_ps: h.bin_width_ps,
            tau_min_ps: h.tau_min_ps,
            tau_max_ps: h.tau_max_ps,
            n_bins: h.n_bins(),
            n_start: h.n_start,
            n_stop: h.n_stop,
            duration_ps: h.duration.as_ps(),
            total_counts: h.total(),
        }
    }
}
