use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    cluster, isolation_forest, project, ClusterMethod, IsolationForestParams, ProjectionMethod, TsneParams,
};
use crate::error::{Error, Result};
use crate::federation::{attribute_session, select_rows, ClientData, RunConfig, RunSetup};
use crate::representation::{AttributeHistogram, FederatedRepresentation, FilterCondition, PrivacySummary};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Embedding,
    Structure,
    Attribute,
}

/// Rows picked in a view and/or histogram-bin predicates. The effective
/// selection is their intersection; with neither, everything is selected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionQuery {
    pub rows: Option<Vec<u32>>,
    pub predicates: FilterCondition,
}

impl SelectionQuery {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn rows(rows: impl IntoIterator<Item = u32>) -> Self {
        Self { rows: Some(rows.into_iter().collect()), predicates: FilterCondition::all() }
    }

    pub fn is_everything(&self) -> bool {
        self.rows.is_none() && self.predicates.is_empty()
    }
}

/// Options of the embedding component.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingOptions {
    pub projection: ProjectionMethod,
    pub tsne: TsneParams,
    pub cluster: Option<ClusterMethod>,
    pub anomalies: Option<IsolationForestParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingPoint {
    pub row: u32,
    pub id: String,
    pub x: f64,
    pub y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anomaly_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anomalous: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingPayload {
    pub checkpoint: u64,
    pub method: ProjectionMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<f64>,
    pub clusters: Option<usize>,
    pub points: Vec<EmbeddingPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructurePayload {
    pub checkpoint: u64,
    /// Rows with at least one edge inside the selection.
    pub nodes: Vec<u32>,
    pub edges: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributePayload {
    pub checkpoint: u64,
    pub filtered: bool,
    pub histograms: Vec<AttributeHistogram>,
    pub privacy: PrivacySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "component", rename_all = "snake_case")]
pub enum ComponentPayload {
    Embedding(EmbeddingPayload),
    Structure(StructurePayload),
    Attribute(AttributePayload),
}

/// What a representation query can draw on.
pub struct QueryContext<'a> {
    pub config: &'a RunConfig,
    pub setup: &'a RunSetup,
    /// In-process parties; needed to evaluate predicates.
    pub parties: Option<&'a [ClientData]>,
}

impl QueryContext<'_> {
    fn parties(&self) -> Result<&[ClientData]> {
        self.parties.ok_or_else(|| {
            Error::invalid("bin predicates need the run's parties, which are not attached to this service")
        })
    }

    /// Effective row set, or `None` for everything.
    pub fn resolve(&self, rep: &FederatedRepresentation, selection: &SelectionQuery) -> Result<Option<BTreeSet<u32>>> {
        let n = rep.node_ids.len();
        let mut rows: Option<BTreeSet<u32>> = None;
        if let Some(list) = &selection.rows {
            if let Some(&bad) = list.iter().find(|&&r| r as usize >= n) {
                return Err(Error::invalid(format!("row {bad} out of range for {n} nodes")));
            }
            rows = Some(list.iter().copied().collect());
        }
        if !selection.predicates.is_empty() {
            selection.predicates.validate(&self.setup.plan.schema)?;
            let matched = select_rows(self.parties()?, &self.setup.index, &selection.predicates)?;
            rows = Some(match rows {
                Some(r) => r.intersection(&matched).copied().collect(),
                None => matched,
            });
        }
        Ok(rows)
    }

    pub fn query(
        &self,
        rep: &FederatedRepresentation,
        component: Component,
        selection: &SelectionQuery,
        options: &EmbeddingOptions,
    ) -> Result<ComponentPayload> {
        Ok(match component {
            Component::Embedding => ComponentPayload::Embedding(self.embedding(rep, selection, options)?),
            Component::Structure => ComponentPayload::Structure(self.structure(rep, selection)?),
            Component::Attribute => ComponentPayload::Attribute(self.attribute(rep, selection)?),
        })
    }

    fn embedding(
        &self,
        rep: &FederatedRepresentation,
        selection: &SelectionQuery,
        options: &EmbeddingOptions,
    ) -> Result<EmbeddingPayload> {
        let selected = self.resolve(rep, selection)?;
        let x = rep.embedding.to_f64_rows();
        let base = self.config.seed;
        let projection = project(&x, options.projection, &options.tsne, seed::derive(base, &[b"projection"]))?;
        let clustering = match &options.cluster {
            Some(m) => Some(cluster(&x, m, seed::derive(base, &[b"cluster"]))?),
            None => None,
        };
        let anomalies = match &options.anomalies {
            Some(p) => Some(isolation_forest(&x, p, seed::derive(base, &[b"anomaly"]))?),
            None => None,
        };
        let flagged: BTreeSet<usize> = anomalies.iter().flat_map(|a| a.flagged.iter().copied()).collect();
        let points = (0..x.len())
            .filter(|&r| selected.as_ref().is_none_or(|s| s.contains(&(r as u32))))
            .map(|r| EmbeddingPoint {
                row: r as u32,
                id: rep.node_ids[r].as_str().to_string(),
                x: projection.coordinates[r][0],
                y: projection.coordinates[r][1],
                cluster: clustering.as_ref().map(|c| c.labels[r]),
                anomaly_score: anomalies.as_ref().map(|a| a.scores[r]),
                anomalous: anomalies.as_ref().map(|_| flagged.contains(&r)),
            })
            .collect();
        Ok(EmbeddingPayload {
            checkpoint: rep.round,
            method: projection.method,
            perplexity: projection.perplexity,
            clusters: clustering.map(|c| c.clusters),
            points,
        })
    }

    fn structure(&self, rep: &FederatedRepresentation, selection: &SelectionQuery) -> Result<StructurePayload> {
        let selected = self.resolve(rep, selection)?;
        let inside = |r: u32| selected.as_ref().is_none_or(|s| s.contains(&r));
        let edges: Vec<(u32, u32)> = rep.structure.iter().copied().filter(|&(a, b)| inside(a) && inside(b)).collect();
        let nodes: BTreeSet<u32> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
        Ok(StructurePayload { checkpoint: rep.round, nodes: nodes.into_iter().collect(), edges })
    }

    fn attribute(&self, rep: &FederatedRepresentation, selection: &SelectionQuery) -> Result<AttributePayload> {
        if selection.predicates.is_empty() {
            return Ok(AttributePayload {
                checkpoint: rep.round,
                filtered: false,
                histograms: rep.histograms.clone(),
                privacy: rep.privacy.clone(),
            });
        }
        selection.predicates.validate(&self.setup.plan.schema)?;
        // the same filter always maps to the same session, so repeating a
        // query returns the same noisy release instead of a fresh one
        let key = serde_json::to_vec(&selection.predicates)?;
        let session = seed::derive(self.config.seed, &[b"query-session", &key]) | 1;
        let histograms =
            attribute_session(self.config, &self.setup.plan, self.parties()?, &selection.predicates, session)?;
        Ok(AttributePayload { checkpoint: rep.round, filtered: true, histograms, privacy: rep.privacy.clone() })
    }
}
