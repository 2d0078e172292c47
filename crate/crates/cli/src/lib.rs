//! Reproducible experiments on top of `photonlab`: stream simulation,
//! g² analysis, saturation sweeps, polarization tomography and the
//! rate-theory saturation power, each writing CSV data and JSON reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod gnuplot;
pub mod output;

pub use config::PipelineConfig;
pub use error::CliError;
