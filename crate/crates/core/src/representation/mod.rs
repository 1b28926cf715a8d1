//! The federated representation: released attribute distributions with
//! filters, structure reconstructed from embeddings, and their assembly.

mod assemble;
mod filter;
mod histogram;
mod reconstruct;

pub use assemble::{
    assemble, AssemblyInput, FederatedRepresentation, PrivacySummary, EDGES_FILE, EMBEDDING_FILE, HISTOGRAMS_FILE,
    NODES_FILE,
};
pub use filter::{Condition, FilterCondition, LocalView, Predicate, Target, Value};
pub use histogram::{
    bin_of, build_histogram, count_nodes, local_metric_ranges, merge_metric_ranges, node_bin, plan_histograms,
    sensitive_records, uniform_edges, AttributeHistogram, Bins, HistogramConfig, HistogramSpec, MetricRange,
};
pub use reconstruct::{nearest_pairs, reconstruct_structure, DistanceMetric, RankedPair, ReconstructionConfig};
