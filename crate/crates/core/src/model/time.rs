use std::fmt;
use std::ops::Sub;

use serde::{Deserialize, Serialize};

/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;

/// Integer picoseconds since the origin of a stream.
///
/// `u64` picoseconds cover about 1.8×10⁷ s, far beyond any acquisition
/// this crate is meant to model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeStamp(pub u64);

impl TimeStamp {
    pub const ZERO: TimeStamp = TimeStamp(0);

    pub const fn from_ps(ps: u64) -> Self {
        TimeStamp(ps)
    }

    pub const fn from_ns(ns: u64) -> Self {
        TimeStamp(ns * 1_000)
    }

    /// Rounds to the nearest picosecond. Negative or non-finite input is an
    /// error of the caller and saturates to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        let ps = (s * PS_PER_S).round();
        if ps.is_finite() && ps > 0.0 {
            TimeStamp(ps as u64)
        } else {
            TimeStamp(0)
        }
    }

    pub const fn as_ps(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / PS_PER_S
    }
}

impl Sub for TimeStamp {
    type Output = i64;

    /// Signed difference in picoseconds.
    fn sub(self, rhs: TimeStamp) -> i64 {
        self.0 as i64 - rhs.0 as i64
    }
}

impl fmt::Display for TimeStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ps", self.0)
    }
}
