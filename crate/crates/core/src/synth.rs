//! Stochastic block model graphs split across parties, for demos and tests.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttrValue, AttributeDef, AttributeKind, AttributeSchema, LocalGraph, NodeId};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbmConfig {
    pub nodes: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Probability that a node is also held by a second party.
    pub shared_fraction: f64,
    pub attributes: bool,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self { nodes: 400, blocks: 2, p_in: 0.08, p_out: 0.004, shared_fraction: 0.2, attributes: true, seed: 0 }
    }
}

impl SbmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.nodes < self.blocks {
            return Err(Error::Config("need at least one node per block".into()));
        }
        for p in [self.p_in, self.p_out, self.shared_fraction] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// A block model instance and its split across parties.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Union graph over all nodes.
    pub graph: LocalGraph,
    /// Block of every node of `graph`, in node order.
    pub labels: Vec<usize>,
    /// `(party id, party graph)`, sorted by party id.
    pub parties: Vec<(String, LocalGraph)>,
}

pub fn synthetic_schema() -> AttributeSchema {
    AttributeSchema::new(vec![
        AttributeDef { name: "age".into(), kind: AttributeKind::Numeric },
        AttributeDef { name: "team".into(), kind: AttributeKind::Categorical },
        AttributeDef { name: "bio".into(), kind: AttributeKind::Text },
    ])
    .expect("static schema is valid")
}

pub fn node_name(i: usize) -> String {
    format!("n{i:05}")
}

pub fn party_name(k: usize) -> String {
    format!("party-{k}")
}

/// Sample a block model graph. Node `i` belongs to block `i * blocks / nodes`.
pub fn sbm(cfg: &SbmConfig) -> Result<(LocalGraph, Vec<usize>)> {
    cfg.validate()?;
    let labels: Vec<usize> = (0..cfg.nodes).map(|i| i * cfg.blocks / cfg.nodes).collect();
    let mut rng = seed::derive_rng(cfg.seed, &[b"sbm-edges"]);
    let mut edges = Vec::new();
    for i in 0..cfg.nodes {
        for j in i + 1..cfg.nodes {
            let p = if labels[i] == labels[j] { cfg.p_in } else { cfg.p_out };
            if rng.random::<f64>() < p {
                edges.push((node_name(i), node_name(j)));
            }
        }
    }
    let mut attr_rng = seed::derive_rng(cfg.seed, &[b"sbm-attributes"]);
    let age_noise = Normal::new(0.0, 4.0).expect("valid normal");
    let topics = ["chess", "football", "music", "hiking", "painting", "cooking"];
    let schema = if cfg.attributes { synthetic_schema() } else { AttributeSchema::empty() };
    let nodes = labels
        .iter()
        .enumerate()
        .map(|(i, &block)| {
            let values = if cfg.attributes {
                let age = (25.0 + 10.0 * block as f64 + age_noise.sample(&mut attr_rng)).round();
                let team = if attr_rng.random::<f64>() < 0.8 {
                    format!("team-{block}")
                } else {
                    format!("team-{}", attr_rng.random_range(0..cfg.blocks))
                };
                let hobby = topics.choose(&mut attr_rng).expect("non-empty");
                let bio = format!("member of group {block} who likes {hobby}");
                vec![AttrValue::Numeric(age), AttrValue::Category(team), AttrValue::Text(bio)]
            } else {
                Vec::new()
            };
            Ok((NodeId::new(node_name(i))?, values))
        })
        .collect::<Result<Vec<_>>>()?;
    let (graph, _) = LocalGraph::from_parts(schema, nodes, edges)?;
    Ok((graph, labels))
}

/// Give every node a home party and, with probability `shared_fraction`, a
/// second one. Each party holds the subgraph induced by its nodes, so edges
/// between nodes that never share a party are lost to everyone.
pub fn split(graph: &LocalGraph, parties: usize, shared_fraction: f64, seed: u64) -> Result<Vec<(String, LocalGraph)>> {
    if parties == 0 {
        return Err(Error::Config("at least one party is required".into()));
    }
    let mut rng = seed::derive_rng(seed, &[b"split"]);
    let mut holders = vec![Vec::new(); graph.node_count()];
    for h in holders.iter_mut() {
        let home = rng.random_range(0..parties);
        h.push(home);
        if parties > 1 && rng.random::<f64>() < shared_fraction {
            let other = (home + rng.random_range(1..parties)) % parties;
            h.push(other);
        }
    }
    Ok((0..parties)
        .map(|k| {
            let g = graph.induced(|id| {
                let v = graph.index_of(id.as_str()).expect("own id");
                holders[v].contains(&k)
            });
            (party_name(k), g)
        })
        .collect())
}

pub fn synthetic_parties(cfg: &SbmConfig, parties: usize) -> Result<SyntheticData> {
    let (graph, labels) = sbm(cfg)?;
    let parties = split(&graph, parties, cfg.shared_fraction, cfg.seed)?;
    Ok(SyntheticData { graph, labels, parties })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_are_denser_inside() {
        let (g, labels) = sbm(&SbmConfig { nodes: 200, ..SbmConfig::default() }).unwrap();
        let (mut inside, mut across) = (0, 0);
        for (a, b) in g.edges() {
            if labels[a] == labels[b] {
                inside += 1;
            } else {
                across += 1;
            }
        }
        assert!(inside > 5 * across, "{inside} vs {across}");
    }

    #[test]
    fn same_seed_same_graph() {
        let cfg = SbmConfig { nodes: 60, ..SbmConfig::default() };
        assert_eq!(sbm(&cfg).unwrap().0.edges(), sbm(&cfg).unwrap().0.edges());
    }

    #[test]
    fn split_covers_every_node() {
        let data = synthetic_parties(&SbmConfig { nodes: 100, ..SbmConfig::default() }, 3).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        let mut total = 0;
        for (_, g) in &data.parties {
            total += g.node_count();
            seen.extend(g.node_ids().iter().cloned());
        }
        assert_eq!(seen.len(), 100);
        assert!(total > 100, "some nodes should be shared");
        for (_, g) in &data.parties {
            for (a, b) in g.edges() {
                let (ua, ub) = (
                    data.graph.index_of(g.node_ids()[a].as_str()).unwrap(),
                    data.graph.index_of(g.node_ids()[b].as_str()).unwrap(),
                );
                assert!(data.graph.has_edge(ua, ub));
            }
        }
    }

    #[test]
    fn single_party_holds_everything() {
        let data = synthetic_parties(&SbmConfig { nodes: 30, ..SbmConfig::default() }, 1).unwrap();
        assert_eq!(data.parties[0].1.edge_count(), data.graph.edge_count());
    }
}
