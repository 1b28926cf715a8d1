use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::histogram::AttributeHistogram;
use super::reconstruct::{nearest_pairs, ReconstructionConfig};
use crate::embedding::{compose_tables, Table};
use crate::error::{Error, Result};
use crate::federation::{Checkpoint, GlobalIndex};
use crate::graph::NodeId;
use crate::privacy::{Mechanism, PrivacyConfig};

pub const EMBEDDING_FILE: &str = "embedding.bin";
pub const EDGES_FILE: &str = "edges.txt";
pub const HISTOGRAMS_FILE: &str = "histograms.json";
pub const NODES_FILE: &str = "nodes.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacySummary {
    pub mechanism: Mechanism,
    /// Sequentially composed epsilon over all protected releases so far.
    pub cumulative_epsilon: f64,
    pub releases: usize,
}

/// The federated representation: embedding, released attribute
/// distributions, and reconstructed structure.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedRepresentation {
    pub round: u64,
    pub config_hash: [u8; 32],
    pub node_ids: Vec<NodeId>,
    /// N x 2M: the learned input table followed by the reduced features.
    pub embedding: Table,
    pub histograms: Vec<AttributeHistogram>,
    /// Unordered row pairs, closest first.
    pub structure: Vec<(u32, u32)>,
    pub privacy: PrivacySummary,
}

pub struct AssemblyInput<'a> {
    pub round: u64,
    pub config_hash: [u8; 32],
    pub index: &'a GlobalIndex,
    /// Input table of the embedding model.
    pub basic: &'a Table,
    /// Projected feature rows, same shape as `basic`.
    pub features: &'a Table,
    /// Input table of the structure model.
    pub structure_table: &'a Table,
    pub histograms: Vec<AttributeHistogram>,
    /// Sum of the edge counts reported by the parties.
    pub reported_edges: usize,
    pub reconstruction: &'a ReconstructionConfig,
    pub privacy: &'a PrivacyConfig,
    pub releases: usize,
}

pub fn assemble(input: AssemblyInput<'_>) -> Result<FederatedRepresentation> {
    let n = input.index.len();
    if input.basic.rows() != n || input.structure_table.rows() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: input.basic.rows() });
    }
    let embedding = compose_tables(input.basic, input.features)?;
    if !embedding.all_finite() {
        return Err(Error::NonFinite("embedding table".into()));
    }
    let budget = input.reconstruction.edge_budget(input.reported_edges, n);
    let structure = nearest_pairs(
        &input.structure_table.to_f64_rows(),
        budget,
        input.reconstruction.metric,
        input.reconstruction.jitter,
        input.reconstruction.seed,
    )?
    .into_iter()
    .map(|p| (p.a, p.b))
    .collect();
    Ok(FederatedRepresentation {
        round: input.round,
        config_hash: input.config_hash,
        node_ids: input.index.ids().to_vec(),
        embedding,
        histograms: input.histograms,
        structure,
        privacy: PrivacySummary {
            mechanism: input.privacy.mechanism,
            cumulative_epsilon: input.privacy.cumulative_epsilon(input.releases),
            releases: input.releases,
        },
    })
}

#[derive(Serialize, Deserialize)]
struct HistogramDocument {
    round: u64,
    privacy: PrivacySummary,
    histograms: Vec<AttributeHistogram>,
}

impl FederatedRepresentation {
    /// Write the export directory: embedding in checkpoint format, edge list
    /// by public node id, histograms as JSON, and the row order of nodes.
    pub fn export(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        Checkpoint::new(self.round, self.config_hash, vec![self.embedding.clone()])?.save(&dir.join(EMBEDDING_FILE))?;

        let mut nodes = BufWriter::new(fs::File::create(dir.join(NODES_FILE))?);
        for id in &self.node_ids {
            writeln!(nodes, "{id}")?;
        }
        nodes.flush()?;

        let mut edges = BufWriter::new(fs::File::create(dir.join(EDGES_FILE))?);
        for &(a, b) in &self.structure {
            writeln!(edges, "{}\t{}", self.node_ids[a as usize], self.node_ids[b as usize])?;
        }
        edges.flush()?;

        let doc =
            HistogramDocument { round: self.round, privacy: self.privacy.clone(), histograms: self.histograms.clone() };
        fs::write(dir.join(HISTOGRAMS_FILE), serde_json::to_vec_pretty(&doc)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let ck = Checkpoint::load(&dir.join(EMBEDDING_FILE))?;
        let embedding =
            ck.tables.into_iter().next().ok_or_else(|| Error::Checkpoint("export holds no embedding table".into()))?;

        let mut node_ids = Vec::new();
        for line in BufReader::new(fs::File::open(dir.join(NODES_FILE))?).lines() {
            let line = line?;
            if !line.is_empty() {
                node_ids.push(NodeId::new(line)?);
            }
        }
        if node_ids.len() != embedding.rows() {
            return Err(Error::DimensionMismatch { expected: embedding.rows(), actual: node_ids.len() });
        }
        let rows: HashMap<&str, u32> = node_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i as u32)).collect();

        let mut structure = Vec::new();
        for (n, line) in BufReader::new(fs::File::open(dir.join(EDGES_FILE))?).lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Malformed { line: n + 1, reason: "expected two tab-separated ids".into() });
            };
            let lookup = |id: &str| {
                rows.get(id)
                    .copied()
                    .ok_or_else(|| Error::Malformed { line: n + 1, reason: format!("unknown node `{id}`") })
            };
            structure.push((lookup(a)?, lookup(b)?));
        }

        let doc: HistogramDocument = serde_json::from_slice(&fs::read(dir.join(HISTOGRAMS_FILE))?)?;
        Ok(Self {
            round: ck.round,
            config_hash: ck.config_hash,
            node_ids,
            embedding,
            histograms: doc.histograms,
            structure,
            privacy: doc.privacy,
        })
    }
}
