use serde::{Deserialize, Serialize};

use super::config::{Phase, RunConfig};
use crate::graph::{AttributeSchema, GlobalStats, LocalAttributeStats, NodeId};
use crate::privacy::PairwiseSeeds;
use crate::representation::{FilterCondition, HistogramSpec, MetricRange};

/// Every message on the wire, in either direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub run_id: String,
    pub round: u64,
    pub client_id: String,
    pub body: Message,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    /// Party to coordinator: public node ids and aggregate statistics.
    Register(Register),
    /// Coordinator to party: everything needed before the first round.
    Init(Box<InitBundle>),
    /// Party to coordinator: projected attribute features by row.
    FeatureUpload {
        rows: Vec<RowVector>,
    },
    /// Coordinator to party: current weights of the party's rows.
    WeightsBroadcast {
        phase: Phase,
        input: Vec<RowWeights>,
        output: Vec<RowWeights>,
    },
    ClientUpdate(ClientUpdate),
    /// Party to coordinator: masked, protected histogram counts.
    AttributeUpload {
        session: u64,
        masked: Vec<u64>,
    },
    RoundMetrics(RoundMetrics),
    Control(Control),
    /// Party to coordinator: the party is leaving because of an error.
    Goodbye {
        reason: String,
    },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Register(_) => "register",
            Message::Init(_) => "init",
            Message::FeatureUpload { .. } => "feature_upload",
            Message::WeightsBroadcast { .. } => "weights_broadcast",
            Message::ClientUpdate(_) => "client_update",
            Message::AttributeUpload { .. } => "attribute_upload",
            Message::RoundMetrics(_) => "round_metrics",
            Message::Control(_) => "control",
            Message::Goodbye { .. } => "goodbye",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Register {
    pub node_ids: Vec<NodeId>,
    pub schema: AttributeSchema,
    pub stats: LocalAttributeStats,
    pub metric_ranges: Vec<MetricRange>,
    pub edge_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitBundle {
    /// Position of the party in the sorted party list.
    pub ordinal: u32,
    pub participants: Vec<u32>,
    /// Total rows (N).
    pub node_count: u64,
    /// Global row of each registered node, in registration order.
    pub rows: Vec<u32>,
    pub config: RunConfig,
    pub stats: GlobalStats,
    pub histograms: Vec<HistogramSpec>,
    pub sensitive: Option<HistogramSpec>,
    pub projection_seed: u64,
    pub mask_seeds: PairwiseSeeds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowWeights {
    pub row: u32,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowVector {
    pub row: u32,
    pub values: Vec<f64>,
}

/// Local change `W - W_init` over the rows a party touched, with its
/// averaging weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpdate {
    pub phase: Phase,
    /// Averaging weight n^k: local training samples.
    pub samples: u64,
    pub loss: f64,
    pub input: Vec<RowVector>,
    pub output: Vec<RowVector>,
    /// Set when local training failed; the update carries no rows.
    pub failure: Option<String>,
}

impl ClientUpdate {
    pub fn failed(phase: Phase, reason: impl Into<String>) -> Self {
        Self { phase, samples: 0, loss: 0.0, input: Vec::new(), output: Vec::new(), failure: Some(reason.into()) }
    }
}

/// One record per (round, party).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u64,
    pub phase: Phase,
    pub client_id: String,
    pub loss: f64,
    pub samples: u64,
    pub accuracy: Option<f64>,
    pub duration_ms: f64,
    /// The party's update was not applied this round.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Control {
    CollectAttributes { session: u64, filter: FilterCondition },
    Pause,
    Resume,
    EarlyStop,
    Finish,
}
