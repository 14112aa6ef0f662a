//! Event-driven model of one bulk TCP transfer across a bottleneck link,
//! captured at the receiving host.
//!
//! Time is kept in integer nanoseconds so event order never depends on
//! floating-point rounding. Segments are indexed by position in the byte
//! stream; every segment but the last carries [`MSS`] bytes.
//!
//! The sender runs slow start and congestion avoidance, fast retransmit with
//! NewReno or SACK-based recovery, and a retransmission timer with go-back-N.
//! The receiver delays acknowledgments, reports SACK blocks when negotiated
//! and flags duplicate segments with a D-SACK block when that is negotiated
//! too. A D-SACK for a retransmitted segment lets the sender undo the window
//! reduction and tolerate more reordering, as Linux does.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{GrowthProfile, LinkParams};
use crate::rng::SplitMix64;
use crate::trace::{Direction, PacketEvent};

pub const MSS: u32 = 1448;
const HEADER_BYTES: u64 = 52;
const INITIAL_CWND: f64 = 10.0 * MSS as f64;
const DELAYED_ACK_NS: u64 = 40_000_000;
const RTO_INITIAL_NS: u64 = 1_000_000_000;
const RTO_MIN_NS: u64 = 200_000_000;
const RTO_MAX_NS: u64 = 60_000_000_000;
const HOST_JITTER_NS: u64 = 20_000;
const MAX_SACK_BLOCKS: usize = 3;
const DUPTHRESH: usize = 3;
const MAX_DUPTHRESH: usize = 8;
/// Largest window a SYN can advertise without scaling.
const SYN_WINDOW: u32 = 65_535;
const SIM_LIMIT_NS: u64 = 4 * 3_600_000_000_000;

/// Simulator-side bookkeeping of one transfer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    /// Distinct payload bytes that reached the receiver.
    pub delivered_bytes: u64,
    pub segments_sent: usize,
    pub retransmissions: usize,
    pub random_drops: usize,
    pub queue_drops: usize,
    pub reordered: usize,
    pub timeouts: usize,
    pub fast_recoveries: usize,
    pub duplicate_arrivals: usize,
    pub dsack_blocks: usize,
    pub undos: usize,
    pub max_advertised_window: u32,
    /// Receiver clock, seconds, when the last data byte was acknowledged.
    pub completion_time: f64,
}

pub(super) struct Flow {
    pub link: LinkParams,
    pub bytes: u64,
    pub sack: bool,
    pub dsack: bool,
    pub receiver_buffer: u32,
    pub sender_buffer: u32,
    pub growth: GrowthProfile,
    pub client_is_sender: bool,
}

#[derive(Debug, Clone)]
struct AckInfo {
    /// Cumulative acknowledgment in segments.
    next: usize,
    window: u64,
    blocks: Vec<(usize, usize)>,
    dsack: Option<usize>,
}

#[derive(Debug, Clone)]
enum Ev {
    SenderStart,
    Arrive(usize),
    Ack(AckInfo),
    DelayedAck(u64),
    Timeout(u64),
    FinArrive,
    LastAck,
}

struct Scheduled {
    at: u64,
    n: u64,
    ev: Ev,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.n) == (other.at, other.n)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.n).cmp(&(self.at, self.n))
    }
}

#[derive(Default)]
struct Queue {
    heap: BinaryHeap<Scheduled>,
    n: u64,
}

impl Queue {
    fn push(&mut self, at: u64, ev: Ev) {
        self.n += 1;
        self.heap.push(Scheduled { at, n: self.n, ev });
    }
}

fn secs_to_ns(s: f64) -> u64 {
    (s * 1e9).round() as u64
}

/// Drop decision and timing of the data direction.
struct Link {
    params: LinkParams,
    delay: u64,
    busy_until: u64,
    in_system: VecDeque<u64>,
    seed: u64,
}

enum Offer {
    Delivered { at: u64, reordered: bool },
    RandomDrop,
    QueueDrop,
}

impl Link {
    fn tx_ns(&self, len: u32) -> u64 {
        (((len as u64 + HEADER_BYTES) * 8) as f64 * 1e9 / self.params.bandwidth).round() as u64
    }

    /// Loss and reordering draws depend only on the segment and how often it
    /// was sent, so two runs that differ in loss rate see coupled drops.
    fn offer(&mut self, now: u64, seg: usize, attempt: u32, len: u32) -> Offer {
        let mut draw = SplitMix64::fork(self.seed, ((seg as u64) << 16) | attempt as u64);
        let lost = draw.uniform() < self.params.loss_rate;
        let reorder = draw.uniform() < self.params.reorder_rate;
        let extra = draw.uniform_in(2.0, 6.0);
        if lost {
            return Offer::RandomDrop;
        }
        while self.in_system.front().is_some_and(|&f| f <= now) {
            self.in_system.pop_front();
        }
        let q = self.params.queue_packets;
        if q > 0 && self.in_system.len() > q {
            return Offer::QueueDrop;
        }
        let tx = self.tx_ns(len);
        let finish = self.busy_until.max(now) + tx;
        self.busy_until = finish;
        self.in_system.push_back(finish);
        let late = if reorder { (tx as f64 * extra) as u64 } else { 0 };
        Offer::Delivered {
            at: finish + self.delay + late,
            reordered: reorder,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    Open,
    /// Fast recovery until the segment index is cumulatively acknowledged.
    Recovery(usize),
    /// Timeout recovery until the segment index is cumulatively acknowledged.
    Loss(usize),
}

struct Undo {
    cwnd: f64,
    ssthresh: f64,
    /// Retransmissions not yet shown spurious by a D-SACK.
    pending: usize,
}

struct Sender {
    n: usize,
    una: usize,
    max_sent: usize,
    sacked: Vec<bool>,
    lost: Vec<bool>,
    /// Retransmitted during the current recovery; not marked lost again by SACK.
    rexmit: Vec<bool>,
    ever_rexmit: Vec<bool>,
    attempts: Vec<u32>,
    sent_at: Vec<u64>,
    cwnd: f64,
    ssthresh: f64,
    dupacks: usize,
    dupthresh: usize,
    phase: Phase,
    /// Fast recovery may not start again until this segment is acknowledged.
    recover_guard: usize,
    peer_window: u64,
    buffer: u64,
    srtt: Option<f64>,
    rttvar: f64,
    rto: u64,
    timer_gen: u64,
    timer_armed: bool,
    w_max: f64,
    epoch_start: Option<u64>,
    undo: Option<Undo>,
    done: bool,
}

struct Receiver {
    got: Vec<bool>,
    next: usize,
    ooo_bytes: u64,
    pending: u32,
    delack_gen: u64,
    right_edge: u64,
    buffer: u64,
    last: usize,
}

struct Sim<'a> {
    flow: &'a Flow,
    q: Queue,
    link: Link,
    tx: Sender,
    rx: Receiver,
    rng: SplitMix64,
    events: Vec<PacketEvent>,
    report: FlowReport,
    data_dir: Direction,
    isn_data: u32,
    isn_ack: u32,
    /// Window advertised by the data sender for its own receive side.
    sender_window: u32,
    delay: u64,
}

impl Flow {
    /// Runs the transfer; returns the receiver-side capture and bookkeeping.
    pub(super) fn run(&self, mut rng: SplitMix64) -> (Vec<PacketEvent>, FlowReport) {
        let n = self.bytes.div_ceil(MSS as u64) as usize;
        let delay = secs_to_ns(self.link.one_way_delay);
        let link_seed = rng.next();
        let isn_data = rng.next() as u32;
        let isn_ack = rng.next() as u32;
        let sender_window = super::TUNED_BUFFER;
        let mut sim = Sim {
            flow: self,
            q: Queue::default(),
            link: Link {
                params: self.link,
                delay,
                busy_until: 0,
                in_system: VecDeque::new(),
                seed: link_seed,
            },
            tx: Sender {
                n,
                una: 0,
                max_sent: 0,
                sacked: vec![false; n],
                lost: vec![false; n],
                rexmit: vec![false; n],
                ever_rexmit: vec![false; n],
                attempts: vec![0; n],
                sent_at: vec![0; n],
                cwnd: INITIAL_CWND,
                ssthresh: f64::INFINITY,
                dupacks: 0,
                dupthresh: DUPTHRESH,
                phase: Phase::Open,
                recover_guard: 0,
                peer_window: self.receiver_buffer as u64,
                buffer: self.sender_buffer as u64,
                srtt: None,
                rttvar: 0.0,
                rto: RTO_INITIAL_NS,
                timer_gen: 0,
                timer_armed: false,
                w_max: 0.0,
                epoch_start: None,
                undo: None,
                done: false,
            },
            rx: Receiver {
                got: vec![false; n],
                next: 0,
                ooo_bytes: 0,
                pending: 0,
                delack_gen: 0,
                right_edge: self.receiver_buffer as u64,
                buffer: self.receiver_buffer as u64,
                last: 0,
            },
            rng,
            events: Vec::with_capacity(3 * n + 16),
            report: FlowReport::default(),
            data_dir: if self.client_is_sender {
                Direction::ClientToServer
            } else {
                Direction::ServerToClient
            },
            isn_data,
            isn_ack,
            sender_window,
            delay,
        };
        sim.handshake();
        while let Some(Scheduled { at, ev, .. }) = sim.q.heap.pop() {
            if at > SIM_LIMIT_NS {
                log::warn!("simulation stopped at its time limit");
                break;
            }
            sim.handle(at, ev);
        }
        sim.report.delivered_bytes = (0..n).filter(|&k| sim.rx.got[k]).map(|k| sim.seg_len(k) as u64).sum();
        (sim.events, sim.report)
    }
}

impl Sim<'_> {
    fn seg_len(&self, k: usize) -> u32 {
        (self.flow.bytes - k as u64 * MSS as u64).min(MSS as u64) as u32
    }

    fn seg_end(&self, k: usize) -> u64 {
        (k as u64 * MSS as u64 + MSS as u64).min(self.flow.bytes)
    }

    fn offset(&self, k: usize) -> u64 {
        (k as u64 * MSS as u64).min(self.flow.bytes)
    }

    fn jitter(&mut self) -> u64 {
        self.rng.next() % HOST_JITTER_NS
    }

    fn record(&mut self, at: u64, dir: Direction, seq: u32, ack: u32, len: u32, flags: (bool, bool, bool), win: u32, sack_cnt: u8) {
        let (syn, fin, ack_flag) = flags;
        self.events.push(PacketEvent {
            ts: at as f64 / 1e9,
            dir,
            seq,
            ack,
            payload_len: len,
            syn,
            fin,
            rst: false,
            ack_flag,
            win,
            sack_cnt,
        });
    }

    fn data_seq(&self, offset: u64) -> u32 {
        self.isn_data.wrapping_add(1).wrapping_add(offset as u32)
    }

    /// The client opens the connection. The receiver's clock starts at the
    /// first packet it sees.
    fn handshake(&mut self) {
        let d = self.delay;
        let ack_dir = self.data_dir.reverse();
        let rx_syn_win = (self.rx.buffer as u32).min(SYN_WINDOW);
        let tx_syn_win = self.sender_window.min(SYN_WINDOW);
        let j1 = self.jitter();
        let j2 = self.jitter();
        if self.flow.client_is_sender {
            // capture at the server: SYN in, SYN-ACK out, ACK in
            self.record(0, self.data_dir, self.isn_data, 0, 0, (true, false, false), tx_syn_win, 0);
            self.record(j1, ack_dir, self.isn_ack, self.isn_data.wrapping_add(1), 0, (true, false, true), rx_syn_win, 0);
            let start = d + j1 + j2;
            self.record(start + d, self.data_dir, self.data_seq(0), self.isn_ack.wrapping_add(1), 0, (false, false, true), self.sender_window, 0);
            self.q.push(start, Ev::SenderStart);
        } else {
            // capture at the client: SYN out, SYN-ACK in, ACK out
            self.record(0, ack_dir, self.isn_ack, 0, 0, (true, false, false), rx_syn_win, 0);
            let synack = 2 * d + j1;
            self.record(synack, self.data_dir, self.isn_data, self.isn_ack.wrapping_add(1), 0, (true, false, true), tx_syn_win, 0);
            let ack = synack + j2;
            self.record(ack, ack_dir, self.isn_ack.wrapping_add(1), self.data_seq(0), 0, (false, false, true), self.rx.buffer as u32, 0);
            self.q.push(ack + d, Ev::SenderStart);
        }
    }

    fn handle(&mut self, now: u64, ev: Ev) {
        match ev {
            Ev::SenderStart => self.try_send(now),
            Ev::Arrive(k) => self.on_arrive(now, k),
            Ev::Ack(info) => self.on_ack(now, info),
            Ev::DelayedAck(gen) if gen == self.rx.delack_gen && self.rx.pending > 0 => self.send_ack(now, None),
            Ev::DelayedAck(_) => {}
            Ev::Timeout(gen) if gen == self.tx.timer_gen && self.tx.timer_armed => self.on_timeout(now),
            Ev::Timeout(_) => {}
            Ev::FinArrive => self.on_fin(now),
            Ev::LastAck => {
                let seq = self.data_seq(self.flow.bytes).wrapping_add(1);
                let win = self.sender_window;
                self.record(now, self.data_dir, seq, self.isn_ack.wrapping_add(2), 0, (false, false, true), win, 0);
            }
        }
    }

    // ---- receiver ----

    fn on_arrive(&mut self, now: u64, k: usize) {
        let len = self.seg_len(k);
        let seq = self.data_seq(self.offset(k));
        let (ack, win) = (self.isn_ack.wrapping_add(1), self.sender_window);
        self.record(now, self.data_dir, seq, ack, len, (false, false, true), win, 0);
        if self.rx.got[k] {
            self.report.duplicate_arrivals += 1;
            let dsack = self.flow.dsack.then_some(k);
            self.send_ack(now, dsack);
            return;
        }
        self.rx.got[k] = true;
        self.rx.last = k;
        if k == self.rx.next {
            let had_ooo = self.rx.ooo_bytes > 0;
            while self.rx.next < self.tx.n && self.rx.got[self.rx.next] {
                if self.rx.next != k {
                    self.rx.ooo_bytes -= self.seg_len(self.rx.next) as u64;
                }
                self.rx.next += 1;
            }
            self.rx.pending += 1;
            if had_ooo || self.rx.pending >= 2 || self.rx.next == self.tx.n {
                self.send_ack(now, None);
            } else {
                self.rx.delack_gen += 1;
                self.q.push(now + DELAYED_ACK_NS, Ev::DelayedAck(self.rx.delack_gen));
            }
        } else if k > self.rx.next {
            self.rx.ooo_bytes += len as u64;
            self.send_ack(now, None);
        } else {
            unreachable!("segment below the cumulative ack was marked missing");
        }
    }

    /// Contiguous received ranges above the cumulative ack, as `[start, end)`.
    fn ooo_ranges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut k = self.rx.next;
        while k < self.tx.n {
            if self.rx.got[k] {
                let start = k;
                while k < self.tx.n && self.rx.got[k] {
                    k += 1;
                }
                out.push((start, k));
            } else {
                k += 1;
            }
        }
        out
    }

    fn send_ack(&mut self, now: u64, dsack: Option<usize>) {
        self.rx.pending = 0;
        self.rx.delack_gen += 1;
        let ack_off = self.offset(self.rx.next);
        let fresh = self.rx.buffer.saturating_sub(self.rx.ooo_bytes);
        let window = fresh.max(self.rx.right_edge.saturating_sub(ack_off));
        self.rx.right_edge = self.rx.right_edge.max(ack_off + window);
        let mut blocks = Vec::new();
        if self.flow.sack {
            let mut ranges = self.ooo_ranges();
            if let Some(i) = ranges.iter().position(|r| r.0 <= self.rx.last && self.rx.last < r.1) {
                blocks.push(ranges.remove(i));
            }
            ranges.reverse();
            blocks.extend(ranges.into_iter().take(MAX_SACK_BLOCKS - blocks.len()));
        }
        if dsack.is_some() {
            self.report.dsack_blocks += 1;
        }
        let sack_cnt = (blocks.len() + dsack.is_some() as usize) as u8;
        let win = window.min(u32::MAX as u64) as u32;
        self.report.max_advertised_window = self.report.max_advertised_window.max(win);
        let at = now + self.jitter();
        let ack = self.data_seq(ack_off);
        self.record(at, self.data_dir.reverse(), self.isn_ack.wrapping_add(1), ack, 0, (false, false, true), win, sack_cnt);
        self.q.push(
            at + self.delay,
            Ev::Ack(AckInfo {
                next: self.rx.next,
                window,
                blocks,
                dsack,
            }),
        );
    }

    fn on_fin(&mut self, now: u64) {
        let fin_seq = self.data_seq(self.flow.bytes);
        let ack = self.isn_ack.wrapping_add(1);
        let win = self.sender_window;
        self.record(now, self.data_dir, fin_seq, ack, 0, (false, true, true), win, 0);
        self.rx.delack_gen += 1;
        let at = now + self.jitter();
        let rwin = self.rx.buffer as u32;
        self.record(at, self.data_dir.reverse(), ack, fin_seq.wrapping_add(1), 0, (false, true, true), rwin, 0);
        let back = at + 2 * self.delay + self.jitter();
        self.q.push(back, Ev::LastAck);
    }

    // ---- sender ----

    fn pipe(&self) -> u64 {
        let t = &self.tx;
        let mut bytes: u64 = (t.una..t.max_sent)
            .filter(|&k| !t.sacked[k] && !t.lost[k])
            .map(|k| self.seg_len(k) as u64)
            .sum();
        if !self.flow.sack && matches!(t.phase, Phase::Recovery(_)) {
            bytes = bytes.saturating_sub(t.dupacks as u64 * MSS as u64);
        }
        bytes
    }

    fn next_segment(&self) -> Option<usize> {
        let t = &self.tx;
        if let Some(k) = (t.una..t.max_sent).find(|&k| t.lost[k] && !t.sacked[k]) {
            return Some(k);
        }
        let k = t.max_sent;
        if k >= t.n {
            return None;
        }
        let end = self.seg_end(k);
        let una_off = self.offset(t.una);
        let window_ok = end <= una_off + t.peer_window;
        let buffer_ok = end - una_off <= t.buffer;
        (window_ok && buffer_ok).then_some(k)
    }

    fn try_send(&mut self, now: u64) {
        while let Some(k) = self.next_segment() {
            let len = self.seg_len(k) as u64;
            let pipe = self.pipe();
            if pipe > 0 && (pipe + len) as f64 > self.tx.cwnd {
                break;
            }
            self.transmit(now, k);
        }
    }

    fn transmit(&mut self, now: u64, k: usize) {
        let len = self.seg_len(k);
        let t = &mut self.tx;
        let attempt = t.attempts[k];
        t.attempts[k] += 1;
        if attempt > 0 {
            t.ever_rexmit[k] = true;
            t.rexmit[k] = true;
            self.report.retransmissions += 1;
            if let Some(u) = t.undo.as_mut() {
                u.pending += 1;
            }
        }
        t.lost[k] = false;
        t.sent_at[k] = now;
        t.max_sent = t.max_sent.max(k + 1);
        self.report.segments_sent += 1;
        match self.link.offer(now, k, attempt, len) {
            Offer::Delivered { at, reordered } => {
                self.report.reordered += reordered as usize;
                self.q.push(at, Ev::Arrive(k));
            }
            Offer::RandomDrop => self.report.random_drops += 1,
            Offer::QueueDrop => self.report.queue_drops += 1,
        }
        if !self.tx.timer_armed {
            self.arm_timer(now);
        }
    }

    fn arm_timer(&mut self, now: u64) {
        self.tx.timer_gen += 1;
        self.tx.timer_armed = true;
        self.q.push(now + self.tx.rto, Ev::Timeout(self.tx.timer_gen));
    }

    fn beta(&self) -> f64 {
        match self.flow.growth {
            GrowthProfile::Renolike => 0.5,
            GrowthProfile::Cubiclike => 0.7,
            GrowthProfile::Biclike => 0.8,
        }
    }

    fn enter_recovery(&mut self, now: u64) {
        let beta = self.beta();
        let t = &mut self.tx;
        t.undo = Some(Undo {
            cwnd: t.cwnd,
            ssthresh: t.ssthresh,
            pending: 0,
        });
        t.w_max = t.cwnd;
        t.ssthresh = (t.cwnd * beta).max(2.0 * MSS as f64);
        t.cwnd = t.ssthresh;
        t.phase = Phase::Recovery(t.max_sent);
        t.recover_guard = t.max_sent;
        t.epoch_start = None;
        self.report.fast_recoveries += 1;
        let _ = now;
    }

    /// SACK loss inference: a segment is lost once `dupthresh` segments
    /// above it are selectively acknowledged.
    fn mark_sack_losses(&mut self) -> bool {
        let t = &mut self.tx;
        let mut above = 0;
        let mut marked = false;
        for k in (t.una..t.max_sent).rev() {
            if t.sacked[k] {
                above += 1;
            } else if above >= t.dupthresh && !t.lost[k] && !t.rexmit[k] {
                t.lost[k] = true;
                marked = true;
            }
        }
        marked
    }

    fn on_ack(&mut self, now: u64, info: AckInfo) {
        if self.tx.done {
            return;
        }
        self.tx.peer_window = info.window;
        for &(s, e) in &info.blocks {
            for k in s..e.min(self.tx.n) {
                self.tx.sacked[k] = true;
            }
        }
        if let Some(d) = info.dsack {
            self.on_dsack(d);
        }
        if info.next > self.tx.una {
            self.on_new_ack(now, info.next);
        } else if info.next == self.tx.una && self.tx.una < self.tx.max_sent && info.dsack.is_none() {
            self.tx.dupacks += 1;
            self.on_dupack(now);
        }
        if self.tx.una >= self.tx.n {
            self.finish(now);
            return;
        }
        self.try_send(now);
    }

    fn on_dsack(&mut self, seg: usize) {
        let t = &mut self.tx;
        if !t.ever_rexmit.get(seg).copied().unwrap_or(false) {
            return;
        }
        t.dupthresh = (t.dupthresh + 1).min(MAX_DUPTHRESH);
        let mut restore = None;
        if let Some(u) = t.undo.as_mut() {
            u.pending = u.pending.saturating_sub(1);
            if u.pending == 0 {
                restore = Some((u.cwnd, u.ssthresh));
            }
        }
        if let Some((cwnd, ssthresh)) = restore {
            t.cwnd = t.cwnd.max(cwnd);
            t.ssthresh = t.ssthresh.max(ssthresh);
            t.undo = None;
            self.report.undos += 1;
        }
    }

    fn on_new_ack(&mut self, now: u64, next: usize) {
        let acked: u64 = (self.tx.una..next).map(|k| self.seg_len(k) as u64).sum();
        let newest = next - 1;
        if !self.tx.ever_rexmit[newest] {
            self.rtt_sample(now - self.tx.sent_at[newest]);
        }
        for k in self.tx.una..next {
            self.tx.sacked[k] = false;
            self.tx.lost[k] = false;
        }
        self.tx.una = next;
        self.tx.dupacks = 0;
        match self.tx.phase {
            Phase::Recovery(r) | Phase::Loss(r) if next >= r => {
                if matches!(self.tx.phase, Phase::Recovery(_)) {
                    self.tx.cwnd = self.tx.ssthresh;
                }
                self.tx.phase = Phase::Open;
                self.tx.rexmit.iter_mut().for_each(|f| *f = false);
            }
            Phase::Recovery(_) => {
                // partial ack: the new head is missing too
                if !self.flow.sack || !self.tx.sacked[next] {
                    self.tx.lost[next] = !self.tx.rexmit[next];
                }
            }
            _ => {}
        }
        if !matches!(self.tx.phase, Phase::Recovery(_)) {
            self.grow(now, acked);
        }
        if self.flow.sack {
            self.mark_sack_losses();
        }
        if self.tx.una < self.tx.max_sent {
            self.arm_timer(now);
        } else {
            self.tx.timer_armed = false;
        }
    }

    fn on_dupack(&mut self, now: u64) {
        let t = &self.tx;
        let dupthresh_hit = t.dupacks >= t.dupthresh;
        let mut lost = if self.flow.sack { self.mark_sack_losses() } else { false };
        if dupthresh_hit && !self.tx.rexmit[self.tx.una] && !self.tx.lost[self.tx.una] && !self.tx.sacked[self.tx.una] {
            if self.flow.sack || self.tx.phase == Phase::Open {
                self.tx.lost[self.tx.una] = true;
                lost = true;
            }
        }
        if lost && self.tx.phase == Phase::Open && self.tx.una >= self.tx.recover_guard {
            self.enter_recovery(now);
        } else if lost && self.tx.phase == Phase::Open {
            // still inside the window of an earlier episode: repair without a new reduction
            self.tx.phase = Phase::Recovery(self.tx.max_sent);
        }
    }

    fn on_timeout(&mut self, now: u64) {
        self.tx.timer_armed = false;
        if self.tx.una >= self.tx.n {
            return;
        }
        self.report.timeouts += 1;
        let flight = (self.offset(self.tx.max_sent) - self.offset(self.tx.una)) as f64;
        let t = &mut self.tx;
        if t.undo.is_none() || t.phase == Phase::Open {
            t.undo = Some(Undo {
                cwnd: t.cwnd,
                ssthresh: t.ssthresh,
                pending: 0,
            });
        }
        t.w_max = t.cwnd;
        t.ssthresh = (flight / 2.0).max(2.0 * MSS as f64);
        t.cwnd = MSS as f64;
        t.epoch_start = None;
        for k in t.una..t.max_sent {
            t.sacked[k] = false;
            t.rexmit[k] = false;
            t.lost[k] = true;
        }
        t.phase = Phase::Loss(t.max_sent);
        t.recover_guard = t.max_sent;
        t.dupacks = 0;
        t.rto = (t.rto * 2).min(RTO_MAX_NS);
        self.try_send(now);
        if !self.tx.timer_armed {
            self.arm_timer(now);
        }
    }

    fn rtt_sample(&mut self, sample_ns: u64) {
        let r = sample_ns as f64;
        let t = &mut self.tx;
        match t.srtt {
            None => {
                t.srtt = Some(r);
                t.rttvar = r / 2.0;
            }
            Some(s) => {
                t.rttvar = 0.75 * t.rttvar + 0.25 * (s - r).abs();
                t.srtt = Some(0.875 * s + 0.125 * r);
            }
        }
        let srtt = t.srtt.expect("set above");
        let rto = srtt + (4.0 * t.rttvar).max(1e6);
        t.rto = (rto as u64).clamp(RTO_MIN_NS, RTO_MAX_NS);
    }

    /// Window growth per newly acknowledged bytes.
    fn grow(&mut self, now: u64, acked: u64) {
        let mss = MSS as f64;
        let t = &mut self.tx;
        if t.cwnd < t.ssthresh {
            t.cwnd += (acked as f64).min(2.0 * mss);
            return;
        }
        let a = acked as f64;
        let segs = t.cwnd / mss;
        let w_max = (t.w_max / mss).max(segs);
        let per_rtt = match self.flow.growth {
            GrowthProfile::Renolike => 1.0,
            GrowthProfile::Cubiclike => {
                let start = *t.epoch_start.get_or_insert(now);
                let rtt = t.srtt.unwrap_or(0.0) / 1e9;
                let elapsed = (now - start) as f64 / 1e9 + rtt;
                let k = (w_max * (1.0 - 0.7) / 0.4).cbrt();
                let target = 0.4 * (elapsed - k).powi(3) + w_max;
                (target - segs).clamp(0.01, segs)
            }
            GrowthProfile::Biclike => {
                if segs < w_max {
                    ((w_max - segs) / 2.0).clamp(1.0, 16.0)
                } else {
                    (segs - w_max).clamp(1.0, 16.0)
                }
            }
        };
        t.cwnd += per_rtt * mss * a / t.cwnd;
    }

    fn finish(&mut self, now: u64) {
        self.tx.done = true;
        self.tx.timer_armed = false;
        self.report.completion_time = now as f64 / 1e9;
        self.q.push(now + self.delay, Ev::FinArrive);
    }
}
