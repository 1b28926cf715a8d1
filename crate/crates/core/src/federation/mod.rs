//! Coordinator and client protocol: initialization, local rounds, federated
//! averaging, and secure attribute aggregation over a pluggable transport.

mod aggregate;
mod attributes;
mod audit;
mod checkpoint;
mod client;
mod config;
mod coordinator;
mod index;
mod protocol;
mod simulate;
mod transport;

pub use aggregate::{federated_average, AggregateReport};
pub use attributes::{decode_histograms, encode_upload, privacy_rng, protected_counts, sensitive_spec, vector_len};
pub use audit::{audit_transcript, AuditReport, Violation};
pub use checkpoint::{config_hash, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use client::{run_client, ClientData, ClientReport};
pub use config::{ClientSource, DataConfig, ModelConfig, ModelKind, Phase, RunConfig};
pub use coordinator::{
    run_coordinator, AttributePlan, ClientSummary, Command, CoordinatorOptions, NoopObserver, RunObserver, RunOutcome,
    RunSetup,
};
pub use index::GlobalIndex;
pub use protocol::{
    ClientUpdate, Control, Envelope, InitBundle, Message, Register, RoundMetrics, RowVector, RowWeights,
};
pub use simulate::{attribute_session, load_parties, select_rows, simulate};
pub use transport::{
    read_frame, write_frame, ClientTransport, InProcessClient, InProcessServer, Incoming, ServerTransport, TcpClient,
    TcpServer, Transcript, MAX_FRAME_BYTES,
};
