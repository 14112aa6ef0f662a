use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    simulate_flow_with_report, ClientParams, FlowReport, GrowthProfile, LinkParams, BUFFER_LEVELS,
    DEFAULT_TRANSFER_BYTES, TUNED_BUFFER,
};
use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::preprocess::{FaultRegistry, Label, LinkClass};
use crate::rng::SplitMix64;
use crate::trace::TracePair;

pub const PRESETS: [&str; 2] = ["healthy", "fault-matrix"];

/// Bottleneck buffer of the emulated testbed, in packets.
pub const MATRIX_QUEUE_PACKETS: usize = 50;

/// Background reordering on the matrix links. Without it a FIFO bottleneck
/// never duplicates a segment and D-SACK has nothing to report.
pub const MATRIX_REORDER_RATE: f64 = 0.01;

/// Healthy link of the matrix: 80 Mb/s, 10 ms, no random loss, a finite
/// bottleneck queue and light reordering.
pub fn matrix_healthy_link() -> LinkParams {
    LinkParams {
        reorder_rate: MATRIX_REORDER_RATE,
        ..LinkParams::healthy().with_queue(MATRIX_QUEUE_PACKETS)
    }
}

fn default_bytes() -> u64 {
    DEFAULT_TRANSFER_BYTES
}

/// One simulated download/upload pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub link: LinkParams,
    pub client: ClientParams,
    #[serde(default = "default_bytes")]
    pub bytes: u64,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn healthy(seed: u64) -> Self {
        Scenario {
            link: LinkParams::healthy(),
            client: ClientParams::healthy(),
            bytes: DEFAULT_TRANSFER_BYTES,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        self.client.validate()?;
        if self.bytes == 0 {
            return Err(Error::Config("scenario must transfer at least one byte".into()));
        }
        Ok(())
    }

    pub fn run(&self) -> Result<TracePair> {
        self.run_with_report().map(|r| r.0)
    }

    pub fn run_with_report(&self) -> Result<(TracePair, [FlowReport; 2])> {
        self.validate()?;
        Ok(simulate_flow_with_report(&self.link, &self.client, self.bytes, self.seed))
    }

    /// Condition implied by the parameters: random loss makes the link
    /// faulty, and each client setting below the tuned default is a fault.
    pub fn truth(&self) -> GroundTruth {
        if self.link.loss_rate > 0.0 {
            return GroundTruth::faulty_link();
        }
        let c = &self.client;
        let mut faults = Vec::new();
        if !c.sack_enabled {
            faults.push("sack_disabled");
        }
        if c.sack_enabled && !c.dsack_enabled {
            faults.push("dsack_disabled");
        }
        if c.read_buffer < TUNED_BUFFER {
            faults.push("read_buf");
        }
        if c.write_buffer < TUNED_BUFFER {
            faults.push("write_buf");
        }
        GroundTruth::healthy(&faults)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Scenario = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        s.validate()?;
        Ok(s)
    }
}

/// A scenario with its known condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScenario {
    pub id: String,
    pub scenario: Scenario,
    pub truth: GroundTruth,
}

impl LabeledScenario {
    pub fn lpd_label(&self) -> Label {
        Label::Link(self.truth.link)
    }

    /// Client class, for healthy-link cases with at most one fault.
    pub fn cfd_label(&self, registry: &FaultRegistry) -> Option<Label> {
        if self.truth.link != LinkClass::Healthy {
            return None;
        }
        let mut faults = self.truth.client_faults.iter();
        match (faults.next(), faults.next()) {
            (None, _) => Some(Label::HEALTHY_CLIENT),
            (Some(f), None) => registry.index_of(f).map(Label::Client),
            _ => None,
        }
    }
}

/// Scenarios of a named preset. `per_class` is ignored by `healthy`.
pub fn preset(name: &str, per_class: usize, seed: u64) -> Result<Vec<LabeledScenario>> {
    match name {
        "healthy" => Ok(vec![LabeledScenario {
            id: "healthy-000".into(),
            scenario: Scenario::healthy(seed),
            truth: GroundTruth::healthy(&[]),
        }]),
        "fault-matrix" => {
            if per_class == 0 {
                return Err(Error::Config("per_class must be at least 1".into()));
            }
            Ok(fault_matrix(per_class, seed))
        }
        other => Err(Error::Config(format!(
            "unknown preset {other:?}; expected one of {}",
            PRESETS.join(", ")
        ))),
    }
}

fn client_with(faults: &[&str], level: u32, rng: &mut SplitMix64) -> ClientParams {
    let mut c = ClientParams::healthy();
    c.cwnd_growth_profile = GrowthProfile::ALL[(rng.next() % 3) as usize];
    c.seed = rng.next();
    for f in faults {
        match *f {
            "sack_disabled" => c.sack_enabled = false,
            "dsack_disabled" => c.dsack_enabled = false,
            "read_buf" => c.read_buffer = level,
            "write_buf" => c.write_buffer = level,
            _ => unreachable!("matrix only uses registered faults"),
        }
    }
    c
}

/// Link and client conditions crossed as on the emulation testbed: a faulty
/// link with a healthy client, the default client on a healthy link, each
/// single client fault on a healthy link, and read plus write buffer faults
/// together. Every link shares the bottleneck of [`matrix_healthy_link`].
pub fn fault_matrix(per_class: usize, seed: u64) -> Vec<LabeledScenario> {
    let healthy_link = matrix_healthy_link();
    let classes: [(&str, &[&str]); 7] = [
        ("faulty-link", &[]),
        ("default-client", &[]),
        ("sack_disabled", &["sack_disabled"]),
        ("dsack_disabled", &["dsack_disabled"]),
        ("read_buf", &["read_buf"]),
        ("write_buf", &["write_buf"]),
        ("read_buf+write_buf", &["read_buf", "write_buf"]),
    ];
    let mut out = Vec::with_capacity(per_class * classes.len());
    for (c, (name, faults)) in classes.iter().enumerate() {
        for i in 0..per_class {
            let mut rng = SplitMix64::fork(seed, ((c as u64) << 32) | i as u64);
            let level = BUFFER_LEVELS[i % BUFFER_LEVELS.len()];
            let (link, truth) = if c == 0 {
                let link = healthy_link
                    .with_loss(rng.uniform_in(0.01, 0.10))
                    .with_delay(rng.uniform_in(0.015, 0.100));
                (link, GroundTruth::faulty_link())
            } else {
                (healthy_link, GroundTruth::healthy(faults))
            };
            let client = client_with(faults, level, &mut rng);
            out.push(LabeledScenario {
                id: format!("{name}-{i:03}"),
                scenario: Scenario {
                    link,
                    client,
                    bytes: DEFAULT_TRANSFER_BYTES,
                    seed: rng.next(),
                },
                truth,
            });
        }
    }
    out
}
