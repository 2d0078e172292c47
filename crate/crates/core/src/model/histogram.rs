use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::time::TimeStamp;

/// How pairs are counted into a coincidence histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistogramMode {
    /// Time-to-amplitude converter emulation: every start is paired with
    /// the first stop that follows it within the window.
    StartStop,
    /// Every ordered (start, stop) pair within the window.
    AllPairs,
}

impl fmt::Display for HistogramMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HistogramMode::StartStop => "start-stop",
            HistogramMode::AllPairs => "all-pairs",
        })
    }
}

impl FromStr for HistogramMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "start-stop" => Ok(HistogramMode::StartStop),
            "all-pairs" => Ok(HistogramMode::AllPairs),
            other => Err(format!(
                "unknown histogram mode `{other}` (expected start-stop or all-pairs)"
            )),
        }
    }
}

/// Binned start–stop delay counts.
///
/// Bin `k` covers delays `[tau_min + k·bin_width, tau_min + (k+1)·bin_width)`
/// picoseconds; there are `round((tau_max - tau_min) / bin_width)` bins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ps: u64,
    pub tau_min_ps: i64,
    pub tau_max_ps: i64,
    pub counts: Vec<u64>,
    pub n_start: u64,
    pub n_stop: u64,
    pub duration: TimeStamp,
    pub mode: HistogramMode,
}

impl CoincidenceHistogram {
    /// Number of bins implied by a binning, or `None` when it is unusable.
    pub fn bin_count(bin_width_ps: u64, tau_min_ps: i64, tau_max_ps: i64) -> Option<usize> {
        if bin_width_ps == 0 || tau_max_ps <= tau_min_ps {
            return None;
        }
        let span = (tau_max_ps - tau_min_ps) as u64;
        if bin_width_ps > span {
            return None;
        }
        Some(((span as f64) / (bin_width_ps as f64)).round() as usize)
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_center_ps(&self, k: usize) -> f64 {
        self.tau_min_ps as f64 + (k as f64 + 0.5) * self.bin_width_ps as f64
    }

    pub fn bin_centers_ps(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|k| self.bin_center_ps(k)).collect()
    }

    /// Bin index for a signed delay, if it falls inside the histogram.
    pub fn bin_of(&self, delay_ps: i64) -> Option<usize> {
        bin_index(delay_ps, self.tau_min_ps, self.bin_width_ps, self.n_bins())
    }
}

#[inline]
pub(crate) fn bin_index(delay_ps: i64, tau_min_ps: i64, bin_width_ps: u64, n_bins: usize) -> Option<usize> {
    if delay_ps < tau_min_ps {
        return None;
    }
    let k = ((delay_ps - tau_min_ps) as u64 / bin_width_ps) as usize;
    (k < n_bins).then_some(k)
}
