use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::time::TimeStamp;

/// Detector channel id. Channel 0 is the start detector and channel 1 the
/// stop detector of an HBT setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Channel(pub u8);

impl Channel {
    pub const START: Channel = Channel(0);
    pub const STOP: Channel = Channel(1);
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhotonRecord {
    pub t: TimeStamp,
    pub channel: Channel,
}

impl PhotonRecord {
    pub const fn new(t: TimeStamp, channel: Channel) -> Self {
        PhotonRecord { t, channel }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StreamError {
    #[error("record {index} at {t} precedes the previous record at {previous}")]
    UnsortedStream {
        index: usize,
        t: TimeStamp,
        previous: TimeStamp,
    },
    #[error("record {index} at {t} lies beyond the stream duration {duration}")]
    OutOfRange {
        index: usize,
        t: TimeStamp,
        duration: TimeStamp,
    },
    #[error("record {index} uses channel {channel}, which the stream does not declare")]
    UnknownChannel { index: usize, channel: Channel },
    #[error("cannot merge streams of durations {a} and {b}")]
    DurationMismatch { a: TimeStamp, b: TimeStamp },
}

/// Time-ordered, channel-tagged detection records over `[0, duration]`.
///
/// Streams are immutable once built. [`EventStream::new`] validates; the
/// unchecked constructor exists for callers that produce records already in
/// order and for ingesting data that is validated afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    records: Vec<PhotonRecord>,
    duration: TimeStamp,
    channels: BTreeSet<Channel>,
    origin_note: String,
}

impl EventStream {
    pub fn new(
        records: Vec<PhotonRecord>,
        duration: TimeStamp,
        channels: impl IntoIterator<Item = Channel>,
        origin_note: impl Into<String>,
    ) -> Result<Self, StreamError> {
        validate_stream(Self::from_parts_unchecked(
            records,
            duration,
            channels,
            origin_note,
        ))
    }

    pub fn from_parts_unchecked(
        records: Vec<PhotonRecord>,
        duration: TimeStamp,
        channels: impl IntoIterator<Item = Channel>,
        origin_note: impl Into<String>,
    ) -> Self {
        EventStream {
            records,
            duration,
            channels: channels.into_iter().collect(),
            origin_note: origin_note.into(),
        }
    }

    pub fn empty(
        duration: TimeStamp,
        channels: impl IntoIterator<Item = Channel>,
        origin_note: impl Into<String>,
    ) -> Self {
        Self::from_parts_unchecked(Vec::new(), duration, channels, origin_note)
    }

    /// Builds a stream from unordered records by sorting on `(t, channel)`.
    /// The sort is stable so equal keys keep their input order.
    pub fn from_unsorted(
        mut records: Vec<PhotonRecord>,
        duration: TimeStamp,
        channels: impl IntoIterator<Item = Channel>,
        origin_note: impl Into<String>,
    ) -> Result<Self, StreamError> {
        records.sort_by_key(|r| (r.t, r.channel));
        Self::new(records, duration, channels, origin_note)
    }

    pub fn records(&self) -> &[PhotonRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<PhotonRecord> {
        self.records
    }

    pub fn duration(&self) -> TimeStamp {
        self.duration
    }

    pub fn channels(&self) -> &BTreeSet<Channel> {
        &self.channels
    }

    pub fn origin_note(&self) -> &str {
        &self.origin_note
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_channel(&self, channel: Channel) -> bool {
        self.channels.contains(&channel)
    }

    /// Sorted timestamps (ps) of one channel.
    pub fn times_on(&self, channel: Channel) -> Vec<u64> {
        self.records
            .iter()
            .filter(|r| r.channel == channel)
            .map(|r| r.t.as_ps())
            .collect()
    }

    pub fn count_on(&self, channel: Channel) -> usize {
        self.records.iter().filter(|r| r.channel == channel).count()
    }

    /// Empirical rate of one channel in s⁻¹.
    pub fn rate_on(&self, channel: Channel) -> f64 {
        let secs = self.duration.as_secs_f64();
        if secs > 0.0 {
            self.count_on(channel) as f64 / secs
        } else {
            0.0
        }
    }

    pub fn with_origin_note(mut self, note: impl Into<String>) -> Self {
        self.origin_note = note.into();
        self
    }
}

/// Checks ordering, range and channel membership of every record.
pub fn validate_stream(stream: EventStream) -> Result<EventStream, StreamError> {
    let mut previous = TimeStamp::ZERO;
    for (index, r) in stream.records.iter().enumerate() {
        if r.t < previous {
            return Err(StreamError::UnsortedStream {
                index,
                t: r.t,
                previous,
            });
        }
        if r.t > stream.duration {
            return Err(StreamError::OutOfRange {
                index,
                t: r.t,
                duration: stream.duration,
            });
        }
        if !stream.channels.contains(&r.channel) {
            return Err(StreamError::UnknownChannel {
                index,
                channel: r.channel,
            });
        }
        previous = r.t;
    }
    Ok(stream)
}

/// Union of two streams of equal duration.
///
/// Records are ordered by `(t, channel)`; exact ties keep `a` before `b`.
/// The origin notes are joined with `" + "`.
pub fn merge_streams(a: &EventStream, b: &EventStream) -> Result<EventStream, StreamError> {
    if a.duration != b.duration {
        return Err(StreamError::DurationMismatch {
            a: a.duration,
            b: b.duration,
        });
    }
    let mut records = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    // both inputs are sorted by t but not necessarily by (t, channel)
    // within equal timestamps, so a two-way merge on t followed by a
    // stable sort of tie runs gives the documented order
    while i < a.records.len() && j < b.records.len() {
        if a.records[i].t <= b.records[j].t {
            records.push(a.records[i]);
            i += 1;
        } else {
            records.push(b.records[j]);
            j += 1;
        }
    }
    records.extend_from_slice(&a.records[i..]);
    records.extend_from_slice(&b.records[j..]);
    sort_tie_runs(&mut records);

    let channels: BTreeSet<Channel> = a.channels.union(&b.channels).copied().collect();
    let note = match (a.origin_note.is_empty(), b.origin_note.is_empty()) {
        (true, _) => b.origin_note.clone(),
        (_, true) => a.origin_note.clone(),
        _ => format!("{} + {}", a.origin_note, b.origin_note),
    };
    Ok(EventStream::from_parts_unchecked(
        records, a.duration, channels, note,
    ))
}

fn sort_tie_runs(records: &mut [PhotonRecord]) {
    let mut start = 0;
    while start < records.len() {
        let t = records[start].t;
        let mut end = start + 1;
        while end < records.len() && records[end].t == t {
            end += 1;
        }
        if end - start > 1 {
            records[start..end].sort_by_key(|r| r.channel);
        }
        start = end;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{poisson_process, SeedTree};

    fn rec(ns: u64, ch: u8) -> PhotonRecord {
        PhotonRecord::new(TimeStamp::from_ns(ns), Channel(ch))
    }

    fn one_second() -> TimeStamp {
        TimeStamp::from_secs_f64(1.0)
    }

    #[test]
    fn empty_stream_is_valid() {
        let s = EventStream::empty(one_second(), [Channel(0)], "");
        assert!(validate_stream(s).is_ok());
    }

    #[test]
    fn ordered_two_channel_stream_is_valid() {
        let s = EventStream::new(
            vec![rec(1, 0), rec(2, 1)],
            one_second(),
            [Channel(0), Channel(1)],
            "",
        );
        assert!(s.is_ok());
    }

    #[test]
    fn decreasing_timestamps_are_rejected() {
        let s = EventStream::new(vec![rec(2, 0), rec(1, 0)], one_second(), [Channel(0)], "");
        assert!(matches!(
            s,
            Err(StreamError::UnsortedStream { index: 1, .. })
        ));
    }

    #[test]
    fn out_of_range_and_unknown_channel() {
        let s = EventStream::new(vec![rec(5, 0)], TimeStamp::from_ns(4), [Channel(0)], "");
        assert!(matches!(s, Err(StreamError::OutOfRange { .. })));
        let s = EventStream::new(vec![rec(1, 2)], one_second(), [Channel(0)], "");
        assert!(matches!(
            s,
            Err(StreamError::UnknownChannel {
                channel: Channel(2),
                ..
            })
        ));
    }

    #[test]
    fn record_at_duration_is_in_range() {
        let s = EventStream::new(vec![rec(4, 0)], TimeStamp::from_ns(4), [Channel(0)], "");
        assert!(s.is_ok());
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let s = EventStream::new(
            vec![rec(1, 0), rec(7, 0)],
            one_second(),
            [Channel(0)],
            "s",
        )
        .unwrap();
        let e = EventStream::empty(one_second(), [Channel(0)], "");
        let m = merge_streams(&s, &e).unwrap();
        assert_eq!(m, s);
    }

    #[test]
    fn merge_sorts_records() {
        let a = EventStream::new(vec![rec(5, 0)], one_second(), [Channel(0)], "a").unwrap();
        let b = EventStream::new(vec![rec(3, 0)], one_second(), [Channel(0)], "b").unwrap();
        let m = merge_streams(&a, &b).unwrap();
        assert_eq!(m.records(), &[rec(3, 0), rec(5, 0)]);
        assert_eq!(m.origin_note(), "a + b");
    }

    #[test]
    fn merge_ties_break_by_channel_then_source() {
        let a = EventStream::new(vec![rec(3, 1)], one_second(), [Channel(1)], "").unwrap();
        let b = EventStream::new(
            vec![rec(3, 0), rec(3, 1)],
            one_second(),
            [Channel(0), Channel(1)],
            "",
        )
        .unwrap();
        let m = merge_streams(&a, &b).unwrap();
        assert_eq!(m.records(), &[rec(3, 0), rec(3, 1), rec(3, 1)]);
        assert!(validate_stream(m).is_ok());
    }

    #[test]
    fn merge_rejects_duration_mismatch() {
        let a = EventStream::empty(one_second(), [Channel(0)], "");
        let b = EventStream::empty(TimeStamp::from_ns(1), [Channel(0)], "");
        assert!(matches!(
            merge_streams(&a, &b),
            Err(StreamError::DurationMismatch { .. })
        ));
    }

    #[test]
    fn merged_poisson_count_matches_rate_sum() {
        let (r1, r2, secs) = (2.0e4, 5.0e4, 1.0);
        let duration = TimeStamp::from_secs_f64(secs);
        let seeds = SeedTree::new(11);
        let a = EventStream::new(
            poisson_process(r1, duration, Channel(0), &mut seeds.rng("a")),
            duration,
            [Channel(0)],
            "",
        )
        .unwrap();
        let b = EventStream::new(
            poisson_process(r2, duration, Channel(1), &mut seeds.rng("b")),
            duration,
            [Channel(1)],
            "",
        )
        .unwrap();
        let m = merge_streams(&a, &b).unwrap();
        let expected = (r1 + r2) * secs;
        assert!((m.len() as f64 - expected).abs() < 5.0 * expected.sqrt());
    }
}
