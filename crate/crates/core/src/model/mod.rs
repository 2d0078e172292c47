//! Shared domain types: timestamps, event streams, coincidence histograms
//! and fit reports, plus the CSV/JSON interchange format for streams.

pub(crate) mod histogram;
pub mod io;
mod report;
mod stream;
mod time;

pub use histogram::{CoincidenceHistogram, HistogramMode};
pub use report::FitReport;
pub use stream::{merge_streams, validate_stream, Channel, EventStream, PhotonRecord, StreamError};
pub use time::{TimeStamp, PS_PER_S};
