//! Stream interchange format.
//!
//! A stream is a CSV file with header `channel,t_ps` and one record per line,
//! next to a sidecar JSON file with the same stem:
//!
//! ```json
//! {"duration_ps": 1000000000, "channels": [0, 1], "origin_note": "..."}
//! ```

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::stream::{Channel, EventStream, PhotonRecord, StreamError};
use super::time::TimeStamp;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Format {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: invalid sidecar: {source}")]
    Sidecar {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Stream {
        path: PathBuf,
        #[source]
        source: StreamError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSidecar {
    pub duration_ps: u64,
    pub channels: Vec<u8>,
    #[serde(default)]
    pub origin_note: String,
}

#[derive(Debug, Deserialize)]
struct CsvRecord {
    channel: u8,
    t_ps: u64,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the CSV body of a stream.
pub fn write_stream_csv<W: Write>(stream: &EventStream, mut w: W) -> io::Result<()> {
    writeln!(w, "channel,t_ps")?;
    for r in stream.records() {
        writeln!(w, "{},{}", r.channel.0, r.t.as_ps())?;
    }
    w.flush()
}

pub fn sidecar_of(stream: &EventStream) -> StreamSidecar {
    StreamSidecar {
        duration_ps: stream.duration().as_ps(),
        channels: stream.channels().iter().map(|c| c.0).collect(),
        origin_note: stream.origin_note().to_string(),
    }
}

/// Writes `path` (CSV) and its sidecar JSON.
pub fn write_stream(stream: &EventStream, path: &Path) -> Result<(), IoError> {
    let f = File::create(path).map_err(io_err(path))?;
    write_stream_csv(stream, BufWriter::new(f)).map_err(io_err(path))?;
    let side = sidecar_path(path);
    let mut json = serde_json::to_string_pretty(&sidecar_of(stream)).expect("sidecar serializes");
    json.push('\n');
    std::fs::write(&side, json).map_err(io_err(&side))
}

/// Parses the CSV body of a stream given its sidecar metadata, then
/// validates the result.
pub fn read_stream_csv<R: Read>(
    reader: R,
    sidecar: &StreamSidecar,
    path: &Path,
) -> Result<EventStream, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != ["channel", "t_ps"] {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `channel,t_ps`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut records = Vec::new();
    for row in rdr.deserialize::<CsvRecord>() {
        let row = row.map_err(|e| IoError::Format {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        records.push(PhotonRecord::new(TimeStamp(row.t_ps), Channel(row.channel)));
    }
    EventStream::new(
        records,
        TimeStamp(sidecar.duration_ps),
        sidecar.channels.iter().map(|&c| Channel(c)),
        sidecar.origin_note.clone(),
    )
    .map_err(|source| IoError::Stream {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a stream CSV and its sidecar.
pub fn read_stream(path: &Path) -> Result<EventStream, IoError> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(io_err(&side))?;
    let sidecar: StreamSidecar =
        serde_json::from_str(&text).map_err(|source| IoError::Sidecar {
            path: side.clone(),
            source,
        })?;
    let f = File::open(path).map_err(io_err(path))?;
    read_stream_csv(io::BufReader::new(f), &sidecar, path)
}
