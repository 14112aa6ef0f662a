//! Single-pass per-trace statistics.

use std::collections::BTreeMap;

use super::catalog::Statistic;
use crate::trace::{Direction, TraceRecord};

/// Payloads below this size count as push-like small segments.
pub const SMALL_SEGMENT_BYTES: u32 = 512;

fn dir_index(d: Direction) -> usize {
    match d {
        Direction::ClientToServer => 0,
        Direction::ServerToClient => 1,
    }
}

/// Maps raw 32-bit sequence numbers onto a monotone 64-bit line.
#[derive(Debug, Clone, Copy)]
struct SeqUnwrap {
    raw: u32,
    value: i64,
}

impl SeqUnwrap {
    fn new(raw: u32) -> Self {
        SeqUnwrap {
            raw,
            value: raw as i64,
        }
    }

    fn advance(&mut self, raw: u32) -> i64 {
        self.value += raw.wrapping_sub(self.raw) as i32 as i64;
        self.raw = raw;
        self.value
    }

    /// Position of `raw` relative to the current point, without moving it.
    fn peek(&self, raw: u32) -> i64 {
        self.value + raw.wrapping_sub(self.raw) as i32 as i64
    }
}

#[derive(Debug, Clone, Copy)]
struct PendingSegment {
    end: i64,
    ts: f64,
    clean: bool,
}

#[derive(Debug, Clone, Default)]
struct Running {
    count: u64,
    sum: f64,
    min: f64,
    max: f64,
}

impl Running {
    fn push(&mut self, v: f64) {
        if self.count == 0 {
            self.min = v;
            self.max = v;
        } else {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
        self.count += 1;
        self.sum += v;
    }

    fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Everything the catalog needs from one trace, computed in one pass.
#[derive(Debug, Clone)]
pub struct TraceSummary {
    elapsed: f64,
    packets: [u64; 2],
    bytes: [u64; 2],
    data_packets: [u64; 2],
    pure_acks: [u64; 2],
    unique_bytes: u64,
    retx_packets: u64,
    retx_bytes: u64,
    ooo_packets: u64,
    dup_acks: u64,
    triple_dup_events: u64,
    sack_total: u64,
    sack_max: u64,
    win: Running,
    zero_windows: u64,
    rtt: Vec<f64>,
    idle_max: Option<f64>,
    segments: Running,
    small_segments: u64,
    syn: u64,
    fin: u64,
    rst: u64,
    initial_window: Option<u64>,
}

impl TraceSummary {
    pub fn new(trace: &TraceRecord) -> Self {
        let events = trace.events();
        let sender = trace.data_direction();
        let receiver = sender.reverse();

        let first_ts = events.first().map_or(0.0, |e| e.ts);
        let last_ts = events.last().map_or(0.0, |e| e.ts);
        let mut s = TraceSummary {
            elapsed: last_ts - first_ts,
            packets: [0; 2],
            bytes: [0; 2],
            data_packets: [0; 2],
            pure_acks: [0; 2],
            unique_bytes: 0,
            retx_packets: 0,
            retx_bytes: 0,
            ooo_packets: 0,
            dup_acks: 0,
            triple_dup_events: 0,
            sack_total: 0,
            sack_max: 0,
            win: Running::default(),
            zero_windows: 0,
            rtt: Vec::new(),
            idle_max: None,
            segments: Running::default(),
            small_segments: 0,
            syn: 0,
            fin: 0,
            rst: 0,
            initial_window: None,
        };

        let mut seq: Option<SeqUnwrap> = None;
        let mut high_end: Option<i64> = None;
        let mut first_data_start: Option<i64> = None;
        let mut pending: BTreeMap<i64, PendingSegment> = BTreeMap::new();
        let mut iw_bytes: u64 = 0;
        let mut iw_closed = false;
        let mut highest_ack: Option<i64> = None;
        let mut last_ack: Option<(i64, u32)> = None;
        let mut dup_run = 0u32;
        let mut prev_ts: Option<f64> = None;

        for e in events {
            if let Some(p) = prev_ts {
                let gap = e.ts - p;
                s.idle_max = Some(s.idle_max.map_or(gap, |m: f64| m.max(gap)));
            }
            prev_ts = Some(e.ts);

            let d = dir_index(e.dir);
            s.packets[d] += 1;
            s.bytes[d] += e.payload_len as u64;
            if e.payload_len > 0 {
                s.data_packets[d] += 1;
            }
            if e.is_pure_ack() {
                s.pure_acks[d] += 1;
            }
            s.syn += e.syn as u64;
            s.fin += e.fin as u64;
            s.rst += e.rst as u64;

            if e.dir == sender {
                let unwrap = seq.get_or_insert_with(|| SeqUnwrap::new(e.seq));
                let start = unwrap.advance(e.seq);
                if e.payload_len == 0 {
                    continue;
                }
                let len = e.payload_len as i64;
                let end = start + len;
                s.segments.push(e.payload_len as f64);
                if e.payload_len < SMALL_SEGMENT_BYTES {
                    s.small_segments += 1;
                }
                if !iw_closed {
                    iw_bytes += e.payload_len as u64;
                }
                first_data_start.get_or_insert(start);
                match high_end {
                    Some(high) if start < high => {
                        s.retx_packets += 1;
                        s.retx_bytes += (end.min(high) - start) as u64;
                        if end > high {
                            s.unique_bytes += (end - high) as u64;
                            high_end = Some(end);
                        }
                        // Karn: any earlier sample overlapping this range is ambiguous
                        for (_, seg) in pending.range_mut(..end).rev() {
                            if seg.end <= start {
                                break;
                            }
                            seg.clean = false;
                        }
                    }
                    prev => {
                        if matches!(prev, Some(high) if start > high) {
                            s.ooo_packets += 1;
                        }
                        s.unique_bytes += len as u64;
                        high_end = Some(end);
                        pending.insert(
                            start,
                            PendingSegment {
                                end,
                                ts: e.ts,
                                clean: true,
                            },
                        );
                    }
                }
            } else {
                debug_assert_eq!(e.dir, receiver);
                s.win.push(e.win as f64);
                if e.win == 0 {
                    s.zero_windows += 1;
                }
                s.sack_total += e.sack_cnt as u64;
                s.sack_max = s.sack_max.max(e.sack_cnt as u64);

                let Some(unwrap) = seq.as_ref() else { continue };
                if !e.ack_flag {
                    continue;
                }
                let ack = unwrap.peek(e.ack);

                if let Some(first) = first_data_start {
                    if !iw_closed && ack > first {
                        iw_closed = true;
                        s.initial_window = Some(iw_bytes);
                    }
                }

                if highest_ack.is_none_or(|h| ack > h) {
                    highest_ack = Some(ack);
                    let covered: Vec<i64> = pending
                        .range(..ack)
                        .filter(|(_, seg)| seg.end <= ack)
                        .map(|(k, _)| *k)
                        .collect();
                    if let Some(newest) = covered.last() {
                        let seg = pending[newest];
                        if seg.clean {
                            s.rtt.push(e.ts - seg.ts);
                        }
                    }
                    for k in covered {
                        pending.remove(&k);
                    }
                }

                let outstanding = high_end.is_some_and(|h| ack < h);
                if e.is_pure_ack() && outstanding && last_ack == Some((ack, e.win)) {
                    s.dup_acks += 1;
                    dup_run += 1;
                    if dup_run == 3 {
                        s.triple_dup_events += 1;
                    }
                } else {
                    dup_run = 0;
                }
                last_ack = Some((ack, e.win));
            }
        }
        if !iw_closed && first_data_start.is_some() {
            s.initial_window = Some(iw_bytes);
        }
        s
    }

    fn sender_data_packets(&self, trace_sender: usize) -> u64 {
        self.data_packets[trace_sender]
    }

    /// Value of a statistic, or `None` where it is undefined for this trace.
    pub fn get(&self, stat: Statistic, sender: Direction) -> Option<f64> {
        let sd = dir_index(sender);
        let rd = 1 - sd;
        let rtt_n = self.rtt.len();
        let rtt_mean = (rtt_n > 0).then(|| self.rtt.iter().sum::<f64>() / rtt_n as f64);
        Some(match stat {
            Statistic::ElapsedTime => self.elapsed,
            Statistic::TotalPackets(d) => self.packets[dir_index(d)] as f64,
            Statistic::TotalBytes(d) => self.bytes[dir_index(d)] as f64,
            Statistic::DataPackets(d) => self.data_packets[dir_index(d)] as f64,
            Statistic::PureAckPackets(d) => self.pure_acks[dir_index(d)] as f64,
            Statistic::Throughput => {
                if self.elapsed > 0.0 {
                    self.unique_bytes as f64 / self.elapsed
                } else {
                    return None;
                }
            }
            Statistic::RetransmittedPackets => self.retx_packets as f64,
            Statistic::RetransmittedBytes => self.retx_bytes as f64,
            Statistic::OutOfOrderPackets => self.ooo_packets as f64,
            Statistic::DupAckCount => self.dup_acks as f64,
            Statistic::TripleDupAckEvents => self.triple_dup_events as f64,
            Statistic::SackBlocksTotal => self.sack_total as f64,
            Statistic::MaxSackCnt => self.sack_max as f64,
            Statistic::WinMin => (self.win.count > 0).then_some(self.win.min)?,
            Statistic::WinMax => (self.win.count > 0).then_some(self.win.max)?,
            Statistic::WinAvg => self.win.mean()?,
            Statistic::ZeroWindowCount => self.zero_windows as f64,
            Statistic::RttAvg => rtt_mean?,
            Statistic::RttMin => self.rtt.iter().copied().reduce(f64::min)?,
            Statistic::RttMax => self.rtt.iter().copied().reduce(f64::max)?,
            Statistic::RttStdev => {
                if rtt_n < 2 {
                    return None;
                }
                let mean = rtt_mean?;
                let ss: f64 = self.rtt.iter().map(|r| (r - mean) * (r - mean)).sum();
                (ss / (rtt_n - 1) as f64).sqrt()
            }
            Statistic::RttSamples => rtt_n as f64,
            Statistic::IdleTimeMax => self.idle_max?,
            Statistic::MeanSegmentSize => self.segments.mean()?,
            Statistic::MaxSegmentSize => (self.segments.count > 0).then_some(self.segments.max)?,
            Statistic::MinSegmentSize => (self.segments.count > 0).then_some(self.segments.min)?,
            Statistic::PushLikeSmallSegmentCount => self.small_segments as f64,
            Statistic::SynCount => self.syn as f64,
            Statistic::FinCount => self.fin as f64,
            Statistic::RstCount => self.rst as f64,
            Statistic::InitialWindowBytes => self.initial_window? as f64,
            Statistic::AckCompressionRatio => {
                let data = self.sender_data_packets(sd);
                if data == 0 {
                    return None;
                }
                self.pure_acks[rd] as f64 / data as f64
            }
            Statistic::BytesPerAck => {
                let acks = self.pure_acks[rd];
                if acks == 0 {
                    return None;
                }
                self.unique_bytes as f64 / acks as f64
            }
        })
    }
}

/// One statistic of one trace; undefined values are reported as 0.
pub fn compute_statistic(trace: &TraceRecord, stat: Statistic) -> f64 {
    TraceSummary::new(trace)
        .get(stat, trace.data_direction())
        .unwrap_or(0.0)
}
