use std::path::PathBuf;

use photonlab::correlation::CorrelationError;
use photonlab::detection::DetectionError;
use photonlab::emitter::EmitterError;
use photonlab::fit::FitError;
use photonlab::model::io::IoError;
use photonlab::polarimetry::PolarimetryError;
use photonlab::rate_theory::RateError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stream(#[from] IoError),
    #[error("simulation: {0}")]
    Emitter(#[from] EmitterError),
    #[error("detection: {0}")]
    Detection(#[from] DetectionError),
    #[error("correlation: {0}")]
    Correlation(#[from] CorrelationError),
    #[error("fit: {0}")]
    Fit(#[from] FitError),
    #[error("saturation sweep needs at least {needed} intensities, got {got}")]
    GridTooSmall { got: usize, needed: usize },
    #[error("polarimetry: {0}")]
    Polarimetry(#[from] PolarimetryError),
    #[error("theory: {0}")]
    Theory(#[from] RateError),
    #[error("{what} fit did not converge in {n_iter} iterations (outputs were written)")]
    NotConverged { what: &'static str, n_iter: usize },
}

impl CliError {
    /// Process exit status, one per failing stage. 2 is left to argument
    /// parsing errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 3,
            CliError::Io { .. } | CliError::Stream(_) => 4,
            CliError::Emitter(_) => 5,
            CliError::Detection(_) => 6,
            CliError::Correlation(_) => 7,
            CliError::Fit(_) | CliError::GridTooSmall { .. } => 8,
            CliError::Polarimetry(_) => 9,
            CliError::Theory(_) => 10,
            CliError::NotConverged { .. } => 11,
        }
    }
}
