//! Seeded randomness.
//!
//! Every stochastic stage draws from a `ChaCha8Rng` whose seed is derived
//! from a root seed and a stage label:
//!
//! ```text
//! child_seed(parent, label) = splitmix64(parent ^ fnv1a64(label))
//! ```
//!
//! Labels are plain strings such as `"emitter"` or `"detector/1"`, so a
//! pipeline stays bit-reproducible for a fixed root seed no matter how its
//! stages are composed or scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Channel, PhotonRecord, TimeStamp, PS_PER_S};

pub type SimRng = ChaCha8Rng;

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn child_seed(parent: u64, label: &str) -> u64 {
    splitmix64(parent ^ fnv1a64(label.as_bytes()))
}

/// A node in the seed hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    seed: u64,
}

impl SeedTree {
    pub const fn new(seed: u64) -> Self {
        SeedTree { seed }
    }

    pub const fn seed(&self) -> u64 {
        self.seed
    }

    pub fn child(&self, label: &str) -> SeedTree {
        SeedTree::new(child_seed(self.seed, label))
    }

    pub fn rng(&self, label: &str) -> SimRng {
        SimRng::seed_from_u64(child_seed(self.seed, label))
    }
}

/// Exponential variate with the given rate, by inverse CDF on `1 - U`.
pub fn sample_exp<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Homogeneous Poisson process on `[0, duration]` as sorted records on one
/// channel. `rate` is in s⁻¹; a non-positive rate yields no records.
pub fn poisson_process<R: Rng + ?Sized>(
    rate: f64,
    duration: TimeStamp,
    channel: Channel,
    rng: &mut R,
) -> Vec<PhotonRecord> {
    if rate <= 0.0 || duration.as_ps() == 0 {
        return Vec::new();
    }
    let rate_per_ps = rate / PS_PER_S;
    let end = duration.as_ps() as f64;
    let mut out = Vec::with_capacity((rate * duration.as_secs_f64() * 1.01) as usize + 16);
    let mut t = 0.0;
    loop {
        t += sample_exp(rng, rate_per_ps);
        let ps = t.round();
        if ps > end {
            break;
        }
        out.push(PhotonRecord::new(TimeStamp(ps as u64), channel));
    }
    out
}
