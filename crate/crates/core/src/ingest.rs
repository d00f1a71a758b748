//! Packet record parsing, validity filtering, and fixed-size windowing.
//!
//! Records are read from a comma-delimited text stream
//! (`timestamp,src,dst,proto`, `#` comments) and grouped into windows of
//! exactly `n_v` valid packets. Windows are count-based; timestamps are
//! carried only for reporting.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use thiserror::Error;

/// Protocol tag attached to each record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    Tcp4,
    Udp4,
    Other,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Tcp4 => "tcp4",
            Protocol::Udp4 => "udp4",
            Protocol::Other => "other",
        }
    }

    /// Maps a tag to a protocol; anything unrecognized becomes `Other`.
    pub fn from_tag(tag: &str) -> Protocol {
        match tag {
            "tcp4" => Protocol::Tcp4,
            "udp4" => Protocol::Udp4,
            _ => Protocol::Other,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One observed packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub timestamp: f64,
    pub src: String,
    pub dst: String,
    pub proto: Protocol,
}

impl PacketRecord {
    pub fn new(
        timestamp: f64,
        src: impl Into<String>,
        dst: impl Into<String>,
        proto: Protocol,
    ) -> Self {
        PacketRecord {
            timestamp,
            src: src.into(),
            dst: dst.into(),
            proto,
        }
    }

    /// Renders the record in the delimited file format, without newline.
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.timestamp, self.src, self.dst, self.proto
        )
    }
}

/// Which records count as valid packets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityPolicy {
    accepted_protocols: BTreeSet<Protocol>,
    pub require_both_addresses: bool,
}

impl Default for ValidityPolicy {
    fn default() -> Self {
        ValidityPolicy {
            accepted_protocols: BTreeSet::from([Protocol::Tcp4]),
            require_both_addresses: true,
        }
    }
}

impl ValidityPolicy {
    pub fn new(
        protocols: impl IntoIterator<Item = Protocol>,
        require_both_addresses: bool,
    ) -> Result<Self, IngestError> {
        let accepted_protocols: BTreeSet<Protocol> = protocols.into_iter().collect();
        if accepted_protocols.is_empty() {
            return Err(IngestError::EmptyProtocolSet);
        }
        Ok(ValidityPolicy {
            accepted_protocols,
            require_both_addresses,
        })
    }

    pub fn accepted_protocols(&self) -> &BTreeSet<Protocol> {
        &self.accepted_protocols
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("read failed at byte offset {offset}: {source}")]
    Io {
        offset: u64,
        #[source]
        source: std::io::Error,
    },
    #[error("window size must be at least 1")]
    ZeroWindow,
    #[error("validity policy must accept at least one protocol")]
    EmptyProtocolSet,
}

/// Parses one data row. `line_no` is used only for error reporting.
pub fn parse_record(line: &str, line_no: u64) -> Result<PacketRecord, IngestError> {
    let err = |reason: String| IngestError::Parse {
        line: line_no,
        reason,
    };
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 4 {
        return Err(err(format!("expected 4 fields, found {}", fields.len())));
    }
    let timestamp = f64::from_str(fields[0].trim())
        .map_err(|e| err(format!("bad timestamp {:?}: {e}", fields[0])))?;
    if !timestamp.is_finite() || timestamp < 0.0 {
        return Err(err(format!(
            "timestamp {timestamp} is not a non-negative number"
        )));
    }
    let src = fields[1].trim();
    let dst = fields[2].trim();
    if src.is_empty() {
        return Err(err("empty source address".into()));
    }
    if dst.is_empty() {
        return Err(err("empty destination address".into()));
    }
    Ok(PacketRecord {
        timestamp,
        src: src.to_owned(),
        dst: dst.to_owned(),
        proto: Protocol::from_tag(fields[3].trim()),
    })
}

pub fn is_valid(rec: &PacketRecord, policy: &ValidityPolicy) -> bool {
    policy.accepted_protocols.contains(&rec.proto)
        && (!policy.require_both_addresses || (!rec.src.is_empty() && !rec.dst.is_empty()))
}

/// What to do with a malformed row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnParseError {
    #[default]
    Skip,
    Abort,
}

impl FromStr for OnParseError {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "skip" => Ok(OnParseError::Skip),
            "abort" => Ok(OnParseError::Abort),
            other => Err(format!(
                "unknown parse-error policy {other:?} (expected skip|abort)"
            )),
        }
    }
}

/// Line reader over the delimited record format.
///
/// Yields parsed records; comment and blank lines are skipped. Malformed
/// rows are either counted and skipped or surfaced as errors depending on
/// the [`OnParseError`] policy. After an error is yielded the reader is
/// exhausted.
pub struct RecordReader<R> {
    inner: R,
    on_error: OnParseError,
    line_no: u64,
    offset: u64,
    skipped: u64,
    buf: String,
    done: bool,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(inner: R, on_error: OnParseError) -> Self {
        RecordReader {
            inner,
            on_error,
            line_no: 0,
            offset: 0,
            skipped: 0,
            buf: String::new(),
            done: false,
        }
    }

    /// Malformed rows skipped so far.
    pub fn skipped_rows(&self) -> u64 {
        self.skipped
    }

    pub fn lines_read(&self) -> u64 {
        self.line_no
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<PacketRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            let n = match self.inner.read_line(&mut self.buf) {
                Ok(n) => n,
                Err(source) => {
                    self.done = true;
                    return Some(Err(IngestError::Io {
                        offset: self.offset,
                        source,
                    }));
                }
            };
            if n == 0 {
                self.done = true;
                break;
            }
            self.offset += n as u64;
            self.line_no += 1;
            let trimmed = self.buf.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            match parse_record(trimmed, self.line_no) {
                Ok(rec) => return Some(Ok(rec)),
                Err(e) => match self.on_error {
                    OnParseError::Skip => self.skipped += 1,
                    OnParseError::Abort => {
                        self.done = true;
                        return Some(Err(e));
                    }
                },
            }
        }
        None
    }
}

/// A full window of exactly `n_v` valid packets.
#[derive(Debug, Clone)]
pub struct Window {
    pub index: usize,
    pub records: Vec<PacketRecord>,
}

impl Window {
    pub fn start_time(&self) -> f64 {
        self.records.first().map_or(0.0, |r| r.timestamp)
    }

    pub fn end_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.timestamp)
    }
}

/// Counters accumulated while windowing a stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub total_records: u64,
    pub invalid_records: u64,
    pub windows_emitted: u64,
    /// Valid records left over in a trailing partial window.
    pub remainder: u64,
    /// Records whose timestamp precedes the previous record's.
    pub out_of_order: u64,
}

/// Groups valid records from a record stream into windows of `n_v`.
///
/// The trailing partial window is never emitted; its size is reported in
/// [`StreamStats::remainder`] once the stream is exhausted.
pub struct WindowStream<I> {
    source: I,
    policy: ValidityPolicy,
    n_v: usize,
    pending: Vec<PacketRecord>,
    stats: StreamStats,
    last_ts: f64,
    next_index: usize,
    finished: bool,
}

pub fn stream_windows<I>(
    source: I,
    policy: ValidityPolicy,
    n_v: usize,
) -> Result<WindowStream<I::IntoIter>, IngestError>
where
    I: IntoIterator<Item = Result<PacketRecord, IngestError>>,
{
    if n_v == 0 {
        return Err(IngestError::ZeroWindow);
    }
    Ok(WindowStream {
        source: source.into_iter(),
        policy,
        n_v,
        pending: Vec::with_capacity(n_v.min(1 << 20)),
        stats: StreamStats::default(),
        last_ts: f64::NEG_INFINITY,
        next_index: 0,
        finished: false,
    })
}

impl<I> WindowStream<I> {
    pub fn stats(&self) -> StreamStats {
        self.stats
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    /// Valid records buffered toward the next window.
    pub fn pending(&self) -> &[PacketRecord] {
        &self.pending
    }
}

impl<I> Iterator for WindowStream<I>
where
    I: Iterator<Item = Result<PacketRecord, IngestError>>,
{
    type Item = Result<Window, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        for item in self.source.by_ref() {
            let rec = match item {
                Ok(rec) => rec,
                Err(e) => {
                    self.finished = true;
                    self.stats.remainder = self.pending.len() as u64;
                    return Some(Err(e));
                }
            };
            self.stats.total_records += 1;
            if rec.timestamp < self.last_ts {
                self.stats.out_of_order += 1;
            }
            self.last_ts = rec.timestamp;
            if !is_valid(&rec, &self.policy) {
                self.stats.invalid_records += 1;
                continue;
            }
            self.pending.push(rec);
            if self.pending.len() == self.n_v {
                let records =
                    std::mem::replace(&mut self.pending, Vec::with_capacity(self.n_v.min(1 << 20)));
                let index = self.next_index;
                self.next_index += 1;
                self.stats.windows_emitted += 1;
                return Some(Ok(Window { index, records }));
            }
        }
        self.finished = true;
        self.stats.remainder = self.pending.len() as u64;
        None
    }
}
