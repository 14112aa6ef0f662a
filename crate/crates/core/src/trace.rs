//! Packet-event traces and their CSV file format.
//!
//! ```text
//! #capture=client,transfer=download,bytes=1000
//! ts,dir,seq,ack,len,syn,fin,rst,ack_flag,win,sack_cnt
//! 0.000125,c2s,17,0,1448,0,0,0,1,65535,0
//! ```
//!
//! Timestamps are seconds relative to the first packet. Sequence and
//! acknowledgment numbers are raw 32-bit values; unwrapping is left to the
//! signature extractor.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const COLUMNS: [&str; 11] = [
    "ts", "dir", "seq", "ack", "len", "syn", "fin", "rst", "ack_flag", "win", "sack_cnt",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

impl Direction {
    pub fn reverse(self) -> Self {
        match self {
            Direction::ClientToServer => Direction::ServerToClient,
            Direction::ServerToClient => Direction::ClientToServer,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Direction::ClientToServer => "c2s",
            Direction::ServerToClient => "s2c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CapturePoint {
    Client,
    Server,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transfer {
    Download,
    Upload,
}

impl Transfer {
    /// Direction in which the payload of this transfer flows.
    pub fn data_direction(self) -> Direction {
        match self {
            Transfer::Download => Direction::ServerToClient,
            Transfer::Upload => Direction::ClientToServer,
        }
    }
}

/// One captured TCP packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketEvent {
    pub ts: f64,
    pub dir: Direction,
    pub seq: u32,
    pub ack: u32,
    pub payload_len: u32,
    pub syn: bool,
    pub fin: bool,
    pub rst: bool,
    pub ack_flag: bool,
    pub win: u32,
    pub sack_cnt: u8,
}

impl PacketEvent {
    /// Zero-payload segment carrying only an acknowledgment.
    pub fn is_pure_ack(&self) -> bool {
        self.payload_len == 0 && self.ack_flag && !self.syn && !self.fin && !self.rst
    }

    fn is_control(&self) -> bool {
        self.syn || self.fin || self.rst
    }
}

/// An ordered bidirectional capture of one transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub capture_point: CapturePoint,
    pub direction_of_transfer: Transfer,
    pub declared_transfer_bytes: u64,
    events: Vec<PacketEvent>,
}

impl TraceRecord {
    /// Builds a record, stably sorting events by timestamp.
    pub fn new(
        capture_point: CapturePoint,
        direction_of_transfer: Transfer,
        declared_transfer_bytes: u64,
        mut events: Vec<PacketEvent>,
    ) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if declared_transfer_bytes == 0 {
            return Err(Error::Config("declared transfer bytes must be positive".into()));
        }
        if let Some(e) = events.iter().find(|e| !e.ts.is_finite() || e.ts < 0.0) {
            return Err(Error::Config(format!("invalid timestamp {}", e.ts)));
        }
        events.sort_by(|a, b| a.ts.total_cmp(&b.ts));
        Ok(TraceRecord {
            capture_point,
            direction_of_transfer,
            declared_transfer_bytes,
            events,
        })
    }

    pub fn events(&self) -> &[PacketEvent] {
        &self.events
    }

    pub fn data_direction(&self) -> Direction {
        self.direction_of_transfer.data_direction()
    }

    /// Count of events violating the zero-payload rule for SYN/FIN/RST.
    pub fn control_payload_violations(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.is_control() && e.payload_len > 0)
            .count()
    }
}

/// The two captures making up one diagnostic sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePair {
    pub download: TraceRecord,
    pub upload: TraceRecord,
}

impl TracePair {
    pub fn new(download: TraceRecord, upload: TraceRecord) -> Result<Self> {
        let pair = TracePair { download, upload };
        pair.check_roles()?;
        Ok(pair)
    }

    /// Download must be captured at the client, upload at the server.
    pub fn check_roles(&self) -> Result<()> {
        let ok = self.download.capture_point == CapturePoint::Client
            && self.download.direction_of_transfer == Transfer::Download
            && self.upload.capture_point == CapturePoint::Server
            && self.upload.direction_of_transfer == Transfer::Upload;
        if ok {
            Ok(())
        } else {
            Err(Error::CatalogMismatch(
                "pair must hold a client-side download and a server-side upload".into(),
            ))
        }
    }
}

impl fmt::Display for CapturePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CapturePoint::Client => "client",
            CapturePoint::Server => "server",
        })
    }
}

impl fmt::Display for Transfer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transfer::Download => "download",
            Transfer::Upload => "upload",
        })
    }
}

impl FromStr for CapturePoint {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "client" => Ok(CapturePoint::Client),
            "server" => Ok(CapturePoint::Server),
            _ => Err(format!("unknown capture point {s:?}")),
        }
    }
}

impl FromStr for Transfer {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "download" => Ok(Transfer::Download),
            "upload" => Ok(Transfer::Upload),
            _ => Err(format!("unknown transfer {s:?}")),
        }
    }
}

/// Decimal seconds with at least six fractional digits, exact on re-read.
fn format_ts(ts: f64) -> String {
    let mut s = format!("{ts}");
    let frac = match s.find('.') {
        Some(dot) => s.len() - dot - 1,
        None => {
            s.push('.');
            0
        }
    };
    for _ in frac..6 {
        s.push('0');
    }
    s
}

fn parse_metadata(line: &str) -> std::result::Result<(CapturePoint, Transfer, u64), String> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| "first line must start with '#'".to_string())?;
    let (mut capture, mut transfer, mut bytes) = (None, None, None);
    for part in body.trim().split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
        match k.trim() {
            "capture" => capture = Some(v.trim().parse::<CapturePoint>()?),
            "transfer" => transfer = Some(v.trim().parse::<Transfer>()?),
            "bytes" => {
                bytes = Some(
                    v.trim()
                        .parse::<u64>()
                        .map_err(|e| format!("bytes: {e}"))?,
                )
            }
            other => return Err(format!("unknown metadata key {other:?}")),
        }
    }
    match (capture, transfer, bytes) {
        (Some(c), Some(t), Some(b)) if b > 0 => Ok((c, t, b)),
        (Some(_), Some(_), Some(_)) => Err("bytes must be positive".into()),
        _ => Err("metadata needs capture, transfer and bytes".into()),
    }
}

fn parse_flag(s: &str, name: &str) -> std::result::Result<bool, String> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(format!("{name} must be 0 or 1, got {s:?}")),
    }
}

fn parse_num<T: FromStr>(s: &str, name: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("{name}: {e} ({s:?})"))
}

fn parse_row(rec: &csv::StringRecord) -> std::result::Result<PacketEvent, String> {
    if rec.len() != COLUMNS.len() {
        return Err(format!(
            "expected {} columns, got {}",
            COLUMNS.len(),
            rec.len()
        ));
    }
    let ts: f64 = parse_num(&rec[0], "ts")?;
    if !ts.is_finite() || ts < 0.0 {
        return Err(format!("ts must be finite and non-negative, got {ts}"));
    }
    let dir = match &rec[1] {
        "c2s" => Direction::ClientToServer,
        "s2c" => Direction::ServerToClient,
        other => return Err(format!("dir must be c2s or s2c, got {other:?}")),
    };
    Ok(PacketEvent {
        ts,
        dir,
        seq: parse_num(&rec[2], "seq")?,
        ack: parse_num(&rec[3], "ack")?,
        payload_len: parse_num(&rec[4], "len")?,
        syn: parse_flag(&rec[5], "syn")?,
        fin: parse_flag(&rec[6], "fin")?,
        rst: parse_flag(&rec[7], "rst")?,
        ack_flag: parse_flag(&rec[8], "ack_flag")?,
        win: parse_num(&rec[9], "win")?,
        sack_cnt: parse_num(&rec[10], "sack_cnt")?,
    })
}

/// Reads a trace file. Line numbers in errors are 1-based file lines.
pub fn read_trace(path: impl AsRef<Path>) -> Result<TraceRecord> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let bad_header = |reason: String| Error::BadHeader {
        path: path.to_path_buf(),
        reason,
    };

    let mut meta = String::new();
    reader.read_line(&mut meta).map_err(|e| Error::io(path, e))?;
    let (capture, transfer, bytes) =
        parse_metadata(meta.trim_end_matches(['\n', '\r'])).map_err(bad_header)?;

    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = csv_reader
        .headers()
        .map_err(|e| bad_header(e.to_string()))?
        .clone();
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(bad_header(format!(
            "expected column header {:?}",
            COLUMNS.join(",")
        )));
    }

    let mut events = Vec::new();
    for (i, rec) in csv_reader.records().enumerate() {
        // metadata + header precede the first data row
        let line = i + 3;
        let rec = rec.map_err(|e| Error::MalformedRow {
            path: path.to_path_buf(),
            line,
            reason: e.to_string(),
        })?;
        let ev = parse_row(&rec).map_err(|reason| Error::MalformedRow {
            path: path.to_path_buf(),
            line,
            reason,
        })?;
        events.push(ev);
    }
    if events.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let record = TraceRecord::new(capture, transfer, bytes, events)?;
    let bad = record.control_payload_violations();
    if bad > 0 {
        log::warn!(
            "{}: {bad} SYN/FIN/RST packets carry payload",
            path.display()
        );
    }
    Ok(record)
}

/// Writes a trace file that [`read_trace`] reads back identically.
pub fn write_trace(trace: &TraceRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if trace.events.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_trace_to(trace, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_trace_to(trace: &TraceRecord, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(
        w,
        "#capture={},transfer={},bytes={}",
        trace.capture_point, trace.direction_of_transfer, trace.declared_transfer_bytes
    )?;
    writeln!(w, "{}", COLUMNS.join(","))?;
    for e in &trace.events {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            format_ts(e.ts),
            e.dir.tag(),
            e.seq,
            e.ack,
            e.payload_len,
            e.syn as u8,
            e.fin as u8,
            e.rst as u8,
            e.ack_flag as u8,
            e.win,
            e.sack_cnt
        )?;
    }
    Ok(())
}
