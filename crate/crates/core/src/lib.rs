//! Photon-statistics toolkit for a single two-level emitter.
//!
//! The crate covers the full chain from a stochastic emitter model through
//! a Hanbury Brown–Twiss detection setup to the analysis tools used on real
//! data: coincidence histograms and g²(τ) estimation, weighted nonlinear
//! least squares for the saturation and antibunching models, polarization
//! tomography of a single qubit and the two-level rate-equation theory of
//! saturation in a fiber.
//!
//! All timestamps are integer picoseconds ([`TimeStamp`]); rates are in s⁻¹
//! and converted at the API boundary.

pub mod correlation;
pub mod detection;
pub mod emitter;
pub mod fit;
pub mod model;
pub mod polarimetry;
pub mod random;
pub mod rate_theory;

pub use model::{
    validate_stream, Channel, CoincidenceHistogram, EventStream, FitReport, HistogramMode,
    PhotonRecord, StreamError, TimeStamp,
};

/// Crate version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
