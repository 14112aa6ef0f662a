use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::Direction;

/// Which capture of the pair a feature is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TraceRole {
    Download,
    Upload,
}

impl TraceRole {
    pub fn prefix(self) -> &'static str {
        match self {
            TraceRole::Download => "down",
            TraceRole::Upload => "up",
        }
    }
}

/// Per-trace statistics. "Sender" is the direction carrying the transfer
/// payload; "receiver" is the opposite direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    ElapsedTime,
    TotalPackets(Direction),
    TotalBytes(Direction),
    DataPackets(Direction),
    PureAckPackets(Direction),
    Throughput,
    RetransmittedPackets,
    RetransmittedBytes,
    OutOfOrderPackets,
    DupAckCount,
    TripleDupAckEvents,
    SackBlocksTotal,
    MaxSackCnt,
    WinMin,
    WinMax,
    WinAvg,
    ZeroWindowCount,
    RttAvg,
    RttMin,
    RttMax,
    RttStdev,
    RttSamples,
    IdleTimeMax,
    MeanSegmentSize,
    MaxSegmentSize,
    MinSegmentSize,
    PushLikeSmallSegmentCount,
    SynCount,
    FinCount,
    RstCount,
    InitialWindowBytes,
    AckCompressionRatio,
    BytesPerAck,
}

const C2S: Direction = Direction::ClientToServer;
const S2C: Direction = Direction::ServerToClient;

impl Statistic {
    /// The v1 statistic set, in catalog order.
    pub const V1: [Statistic; 37] = [
        Statistic::ElapsedTime,
        Statistic::TotalPackets(C2S),
        Statistic::TotalPackets(S2C),
        Statistic::TotalBytes(C2S),
        Statistic::TotalBytes(S2C),
        Statistic::DataPackets(C2S),
        Statistic::DataPackets(S2C),
        Statistic::PureAckPackets(C2S),
        Statistic::PureAckPackets(S2C),
        Statistic::Throughput,
        Statistic::RetransmittedPackets,
        Statistic::RetransmittedBytes,
        Statistic::OutOfOrderPackets,
        Statistic::DupAckCount,
        Statistic::TripleDupAckEvents,
        Statistic::SackBlocksTotal,
        Statistic::MaxSackCnt,
        Statistic::WinMin,
        Statistic::WinMax,
        Statistic::WinAvg,
        Statistic::ZeroWindowCount,
        Statistic::RttAvg,
        Statistic::RttMin,
        Statistic::RttMax,
        Statistic::RttStdev,
        Statistic::RttSamples,
        Statistic::IdleTimeMax,
        Statistic::MeanSegmentSize,
        Statistic::MaxSegmentSize,
        Statistic::MinSegmentSize,
        Statistic::PushLikeSmallSegmentCount,
        Statistic::SynCount,
        Statistic::FinCount,
        Statistic::RstCount,
        Statistic::InitialWindowBytes,
        Statistic::AckCompressionRatio,
        Statistic::BytesPerAck,
    ];

    pub fn name(self) -> String {
        let dir = |d: Direction| match d {
            Direction::ClientToServer => "c2s",
            Direction::ServerToClient => "s2c",
        };
        match self {
            Statistic::ElapsedTime => "elapsed_time".into(),
            Statistic::TotalPackets(d) => format!("total_packets_{}", dir(d)),
            Statistic::TotalBytes(d) => format!("total_bytes_{}", dir(d)),
            Statistic::DataPackets(d) => format!("data_packets_{}", dir(d)),
            Statistic::PureAckPackets(d) => format!("pure_ack_packets_{}", dir(d)),
            Statistic::Throughput => "throughput".into(),
            Statistic::RetransmittedPackets => "retransmitted_packets".into(),
            Statistic::RetransmittedBytes => "retransmitted_bytes".into(),
            Statistic::OutOfOrderPackets => "out_of_order_packets".into(),
            Statistic::DupAckCount => "dup_ack_count".into(),
            Statistic::TripleDupAckEvents => "triple_dup_ack_events".into(),
            Statistic::SackBlocksTotal => "sack_blocks_total".into(),
            Statistic::MaxSackCnt => "max_sack_cnt".into(),
            Statistic::WinMin => "win_min".into(),
            Statistic::WinMax => "win_max".into(),
            Statistic::WinAvg => "win_avg".into(),
            Statistic::ZeroWindowCount => "zero_window_count".into(),
            Statistic::RttAvg => "rtt_avg".into(),
            Statistic::RttMin => "rtt_min".into(),
            Statistic::RttMax => "rtt_max".into(),
            Statistic::RttStdev => "rtt_stdev".into(),
            Statistic::RttSamples => "rtt_samples".into(),
            Statistic::IdleTimeMax => "idle_time_max".into(),
            Statistic::MeanSegmentSize => "mean_segment_size".into(),
            Statistic::MaxSegmentSize => "max_segment_size".into(),
            Statistic::MinSegmentSize => "min_segment_size".into(),
            Statistic::PushLikeSmallSegmentCount => "push_like_small_segment_count".into(),
            Statistic::SynCount => "syn_count".into(),
            Statistic::FinCount => "fin_count".into(),
            Statistic::RstCount => "rst_count".into(),
            Statistic::InitialWindowBytes => "initial_window_bytes".into(),
            Statistic::AckCompressionRatio => "ack_compression_ratio".into(),
            Statistic::BytesPerAck => "bytes_per_ack".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub trace: TraceRole,
    pub statistic: Statistic,
}

/// Versioned, ordered list of features; index `i` of a signature is feature `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    version: String,
    features: Vec<FeatureDef>,
}

impl FeatureCatalog {
    pub const V1: &'static str = "v1";

    /// Every v1 statistic on the download trace, then on the upload trace.
    pub fn v1() -> Self {
        let features = [TraceRole::Download, TraceRole::Upload]
            .into_iter()
            .flat_map(|role| {
                Statistic::V1.into_iter().map(move |statistic| FeatureDef {
                    name: format!("{}_{}", role.prefix(), statistic.name()),
                    trace: role,
                    statistic,
                })
            })
            .collect();
        FeatureCatalog {
            version: Self::V1.to_string(),
            features,
        }
    }

    pub fn by_version(version: &str) -> Result<Self> {
        match version {
            Self::V1 => Ok(Self::v1()),
            other => Err(Error::CatalogMismatch(format!(
                "unknown catalog version {other:?}"
            ))),
        }
    }

    pub fn custom(version: impl Into<String>, features: Vec<FeatureDef>) -> Result<Self> {
        let version = version.into();
        if version.is_empty() || features.is_empty() {
            return Err(Error::Config("catalog needs a version and features".into()));
        }
        let mut seen = BTreeSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Config(format!("duplicate feature name {:?}", f.name)));
            }
        }
        Ok(FeatureCatalog { version, features })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }
}

impl fmt::Display for FeatureCatalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} features)", self.version, self.features.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v1_is_split_evenly_with_unique_names() {
        let c = FeatureCatalog::v1();
        assert_eq!(c.len(), 74);
        let down = c
            .features()
            .iter()
            .filter(|f| f.trace == TraceRole::Download)
            .count();
        assert_eq!(down * 2, c.len());
        let names: BTreeSet<_> = c.names().into_iter().collect();
        assert_eq!(names.len(), c.len());
        assert_eq!(c.features()[0].name, "down_elapsed_time");
        assert_eq!(c.features()[37].name, "up_elapsed_time");
    }

    #[test]
    fn custom_rejects_duplicates() {
        let f = FeatureDef {
            name: "x".into(),
            trace: TraceRole::Download,
            statistic: Statistic::ElapsedTime,
        };
        assert!(FeatureCatalog::custom("t", vec![f.clone(), f]).is_err());
        assert!(FeatureCatalog::by_version("v9").is_err());
    }
}
