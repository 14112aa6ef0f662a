//! Desk-scale stand-ins for a physical testbed: a discrete-event TCP-like
//! flow simulator with fault injection, and a generator of synthetic
//! signatures with a known artifact structure.

mod flow;
mod scenario;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::trace::{CapturePoint, TracePair, TraceRecord, Transfer};

pub use flow::{FlowReport, MSS};
pub use scenario::{
    matrix_healthy_link, fault_matrix, preset, LabeledScenario, Scenario, MATRIX_QUEUE_PACKETS, MATRIX_REORDER_RATE,
    PRESETS,
};
pub use synth::{generate_synthetic_signature, synthetic_database, ClassArtifactSpec, Noise, SYNTHETIC_CATALOG};

/// Desk-scale default transfer size.
pub const DEFAULT_TRANSFER_BYTES: u64 = 2 * 1024 * 1024;

/// Buffer levels used for the buffer-fault presets.
pub const BUFFER_LEVELS: [u32; 3] = [16 * 1024, 32 * 1024, 64 * 1024];

/// Receive and send buffer of a well-tuned host.
pub const TUNED_BUFFER: u32 = 1024 * 1024;

/// Bottleneck link between client and server. Loss and reordering apply to
/// data segments; acknowledgments cross the link unharmed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    /// Bits per second.
    pub bandwidth: f64,
    /// Seconds.
    pub one_way_delay: f64,
    pub loss_rate: f64,
    pub reorder_rate: f64,
    /// Packets that may wait behind the one on the wire; 0 means unbounded.
    #[serde(default)]
    pub queue_packets: usize,
}

impl LinkParams {
    /// 80 Mb/s, 10 ms, no loss, no reordering, unbounded queue.
    pub fn healthy() -> Self {
        LinkParams {
            bandwidth: 80e6,
            one_way_delay: 0.010,
            loss_rate: 0.0,
            reorder_rate: 0.0,
            queue_packets: 0,
        }
    }

    pub fn with_loss(mut self, loss_rate: f64) -> Self {
        self.loss_rate = loss_rate;
        self
    }

    pub fn with_delay(mut self, one_way_delay: f64) -> Self {
        self.one_way_delay = one_way_delay;
        self
    }

    pub fn with_queue(mut self, queue_packets: usize) -> Self {
        self.queue_packets = queue_packets;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if !(self.one_way_delay >= 0.0 && self.one_way_delay.is_finite()) {
            return Err(Error::Config(format!("delay must be non-negative, got {}", self.one_way_delay)));
        }
        for (name, p) in [("loss_rate", self.loss_rate), ("reorder_rate", self.reorder_rate)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {p}")));
            }
        }
        Ok(())
    }
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams::healthy()
    }
}

/// Coarse shape of congestion-window growth after a loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthProfile {
    Cubiclike,
    Biclike,
    Renolike,
}

impl GrowthProfile {
    pub const ALL: [GrowthProfile; 3] = [GrowthProfile::Cubiclike, GrowthProfile::Biclike, GrowthProfile::Renolike];
}

/// Client host configuration; the server is always well tuned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientParams {
    pub sack_enabled: bool,
    pub dsack_enabled: bool,
    /// Socket receive buffer, bytes.
    pub read_buffer: u32,
    /// Socket send buffer, bytes.
    pub write_buffer: u32,
    pub cwnd_growth_profile: GrowthProfile,
    pub seed: u64,
}

impl ClientParams {
    pub fn healthy() -> Self {
        ClientParams {
            sack_enabled: true,
            dsack_enabled: true,
            read_buffer: TUNED_BUFFER,
            write_buffer: TUNED_BUFFER,
            cwnd_growth_profile: GrowthProfile::Cubiclike,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.read_buffer == 0 || self.write_buffer == 0 {
            return Err(Error::Config("socket buffers must be positive".into()));
        }
        Ok(())
    }
}

impl Default for ClientParams {
    fn default() -> Self {
        ClientParams::healthy()
    }
}

/// Simulates a download (captured at the client) and an upload (captured at
/// the server) of `transfer_bytes` each.
///
/// Panics if the parameters are invalid or `transfer_bytes` is zero; use
/// [`Scenario::run`] for checked input.
pub fn simulate_flow(link: &LinkParams, client: &ClientParams, transfer_bytes: u64, seed: u64) -> TracePair {
    simulate_flow_with_report(link, client, transfer_bytes, seed).0
}

/// As [`simulate_flow`], also returning the simulator's own bookkeeping for
/// the download and the upload.
pub fn simulate_flow_with_report(
    link: &LinkParams,
    client: &ClientParams,
    transfer_bytes: u64,
    seed: u64,
) -> (TracePair, [FlowReport; 2]) {
    link.validate().expect("valid link parameters");
    client.validate().expect("valid client parameters");
    assert!(transfer_bytes > 0, "transfer must carry data");
    let mix = seed ^ client.seed.rotate_left(32);
    let sack = client.sack_enabled;
    // D-SACK is a receiver-side option: the client's switch decides what it
    // reports on the download, the server always reports on the upload.
    let client_dsack = sack && client.dsack_enabled;
    let down = flow::Flow {
        link: *link,
        bytes: transfer_bytes,
        sack,
        dsack: client_dsack,
        receiver_buffer: client.read_buffer,
        sender_buffer: TUNED_BUFFER,
        growth: client.cwnd_growth_profile,
        client_is_sender: false,
    }
    .run(SplitMix64::fork(mix, 1));
    let up = flow::Flow {
        link: *link,
        bytes: transfer_bytes,
        sack,
        dsack: sack,
        receiver_buffer: TUNED_BUFFER,
        sender_buffer: client.write_buffer,
        growth: client.cwnd_growth_profile,
        client_is_sender: true,
    }
    .run(SplitMix64::fork(mix, 2));
    let download = TraceRecord::new(CapturePoint::Client, Transfer::Download, transfer_bytes, down.0)
        .expect("simulator emits valid traces");
    let upload = TraceRecord::new(CapturePoint::Server, Transfer::Upload, transfer_bytes, up.0)
        .expect("simulator emits valid traces");
    (
        TracePair::new(download, upload).expect("roles are fixed"),
        [down.1, up.1],
    )
}

#[cfg(test)]
mod tests;
