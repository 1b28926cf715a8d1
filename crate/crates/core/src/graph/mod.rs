//! Local graph data model.
//!
//! A [`LocalGraph`] is one party's private graph. It never leaves the client;
//! only aggregates derived from it (statistics, histograms, weight deltas) do.

mod load;
mod metrics;
mod stats;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use load::{load_graph, load_graph_files, LoadReport};
pub use metrics::{topology_metric, TopologyMetricKind};
pub(crate) use stats::tokens;
pub use stats::{
    local_attribute_stats, AttributeStats, GlobalAttribute, GlobalStats, LocalAttributeStats, TEXT_VOCABULARY_SIZE,
};

/// Public node identifier. The same entity may appear in several parties.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId(String);

impl NodeId {
    pub fn new(value: impl Into<String>) -> Result<Self> {
        let value = value.into();
        if value.is_empty() {
            return Err(Error::invalid("node id must be non-empty"));
        }
        Ok(NodeId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for NodeId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        NodeId::new(value)
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> String {
        id.0
    }
}

impl std::borrow::Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Categorical,
    Numeric,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub kind: AttributeKind,
}

/// Ordered attribute schema shared by every party in a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeSchema {
    entries: Vec<AttributeDef>,
}

impl AttributeSchema {
    pub fn new(entries: Vec<AttributeDef>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for entry in &entries {
            if entry.name.is_empty() {
                return Err(Error::Schema("attribute names must be non-empty".into()));
            }
            if !seen.insert(entry.name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute `{}`", entry.name)));
            }
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Number of attributes (J).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[AttributeDef] {
        &self.entries
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn get(&self, name: &str) -> Option<(usize, &AttributeDef)> {
        self.position(name).map(|i| (i, &self.entries[i]))
    }
}

/// One attribute cell. Missing values are explicit and excluded from
/// statistics and histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttrValue {
    Missing,
    Numeric(f64),
    Category(String),
    Text(String),
}

impl AttrValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, AttrValue::Missing)
    }
}

/// One party's private graph: undirected, unweighted, simple.
#[derive(Debug, Clone)]
pub struct LocalGraph {
    schema: AttributeSchema,
    ids: Vec<NodeId>,
    lookup: HashMap<NodeId, usize>,
    // neighbour lists sorted by neighbour NodeId
    adjacency: Vec<Vec<usize>>,
    attributes: Vec<Vec<AttrValue>>,
    edge_count: usize,
}

impl LocalGraph {
    /// Build a graph from explicit node rows and edges. Self-loops and
    /// duplicate edges are dropped and counted in the returned report.
    pub fn from_parts<I, A, B>(
        schema: AttributeSchema,
        nodes: Vec<(NodeId, Vec<AttrValue>)>,
        edges: I,
    ) -> Result<(Self, LoadReport)>
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut ids = Vec::with_capacity(nodes.len());
        let mut lookup = HashMap::with_capacity(nodes.len());
        let mut attributes = Vec::with_capacity(nodes.len());
        for (id, values) in nodes {
            if values.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "node `{id}` has {} attribute values, schema has {}",
                    values.len(),
                    schema.len()
                )));
            }
            for (value, def) in values.iter().zip(schema.entries()) {
                let ok = match (value, def.kind) {
                    (AttrValue::Missing, _) => true,
                    (AttrValue::Numeric(v), AttributeKind::Numeric) => v.is_finite(),
                    (AttrValue::Category(_), AttributeKind::Categorical) => true,
                    (AttrValue::Text(_), AttributeKind::Text) => true,
                    _ => false,
                };
                if !ok {
                    return Err(Error::Schema(format!(
                        "node `{id}`: value {value:?} does not fit attribute `{}`",
                        def.name
                    )));
                }
            }
            if lookup.insert(id.clone(), ids.len()).is_some() {
                return Err(Error::invalid(format!("duplicate node id `{id}`")));
            }
            ids.push(id);
            attributes.push(values);
        }

        let mut report = LoadReport::default();
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); ids.len()];
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let ia = *lookup.get(a).ok_or_else(|| Error::DanglingEndpoint(a.to_string()))?;
            let ib = *lookup.get(b).ok_or_else(|| Error::DanglingEndpoint(b.to_string()))?;
            if ia == ib {
                report.self_loops_dropped += 1;
                continue;
            }
            if !seen.insert((ia.min(ib), ia.max(ib))) {
                report.duplicates_dropped += 1;
                continue;
            }
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
        }
        for list in &mut adjacency {
            list.sort_by(|&x, &y| ids[x].cmp(&ids[y]));
        }
        let edge_count = seen.len();
        report.edges = edge_count;
        report.nodes = ids.len();
        Ok((Self { schema, ids, lookup, adjacency, attributes, edge_count }, report))
    }

    /// Graph without attributes; node ids are taken in the given order.
    pub fn unattributed<I, A, B>(ids: &[&str], edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let nodes = ids.iter().map(|id| Ok((NodeId::new(*id)?, Vec::new()))).collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(AttributeSchema::empty(), nodes, edges)?.0)
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn attributes(&self, node: usize) -> &[AttrValue] {
        &self.attributes[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let target = &self.ids[b];
        self.adjacency[a].binary_search_by(|&x| self.ids[x].cmp(target)).is_ok()
    }

    /// Edges as unordered local index pairs `(low, high)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (a, list) in self.adjacency.iter().enumerate() {
            out.extend(list.iter().filter(|&&b| a < b).map(|&b| (a, b)));
        }
        out.sort_unstable();
        out
    }

    pub(crate) fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Subgraph induced by the nodes for which `keep` returns true.
    pub fn induced<F: Fn(&NodeId) -> bool>(&self, keep: F) -> LocalGraph {
        let nodes: Vec<_> = self
            .ids
            .iter()
            .zip(&self.attributes)
            .filter(|(id, _)| keep(id))
            .map(|(id, attrs)| (id.clone(), attrs.clone()))
            .collect();
        let kept: BTreeSet<&NodeId> = nodes.iter().map(|(id, _)| id).collect();
        let edges: Vec<(String, String)> = self
            .edges()
            .into_iter()
            .filter(|(a, b)| kept.contains(&self.ids[*a]) && kept.contains(&self.ids[*b]))
            .map(|(a, b)| (self.ids[a].to_string(), self.ids[b].to_string()))
            .collect();
        let (graph, _) = LocalGraph::from_parts(self.schema.clone(), nodes, edges)
            .expect("induced subgraph of a valid graph is valid");
        graph
    }
}
