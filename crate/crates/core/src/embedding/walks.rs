use rand::Rng;

use super::WalkConfig;
use crate::error::{Error, Result};
use crate::federation::GlobalIndex;
use crate::graph::LocalGraph;
use crate::seed;

/// Random walks over global row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<u32>>,
}

impl WalkCorpus {
    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }
}

/// Uniform random walks, `walks_per_node` from every node in local order.
///
/// Each start node draws from its own stream seeded by its public id, and
/// neighbour lists are ordered by id, so a node's walks do not depend on the
/// order in which nodes were loaded.
pub fn generate_walks(g: &LocalGraph, index: &GlobalIndex, cfg: &WalkConfig) -> Result<WalkCorpus> {
    let rows = index.rows_for(g.node_ids())?;
    generate_walks_on_rows(g, &rows, cfg)
}

/// As [`generate_walks`], with the global row of every local node given
/// directly (in local node order).
pub fn generate_walks_on_rows(g: &LocalGraph, rows: &[u32], cfg: &WalkConfig) -> Result<WalkCorpus> {
    cfg.validate()?;
    if rows.len() != g.node_count() {
        return Err(Error::DimensionMismatch { expected: g.node_count(), actual: rows.len() });
    }
    let mut walks = Vec::with_capacity(g.node_count() * cfg.walks_per_node);
    for (start, id) in g.node_ids().iter().enumerate() {
        let mut rng = seed::derive_rng(cfg.seed, &[b"walk", id.as_str().as_bytes()]);
        for _ in 0..cfg.walks_per_node {
            let mut walk = Vec::with_capacity(cfg.walk_length);
            walk.push(rows[start]);
            let mut current = start;
            while walk.len() < cfg.walk_length {
                let neighbors = g.neighbors(current);
                if neighbors.is_empty() {
                    break;
                }
                current = neighbors[rng.random_range(0..neighbors.len())];
                walk.push(rows[current]);
            }
            walks.push(walk);
        }
    }
    Ok(WalkCorpus { walks })
}

/// Skip-gram `(center, context)` pairs within `window` positions.
pub fn training_pairs(corpus: &WalkCorpus, window: usize) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    for walk in &corpus.walks {
        for (i, &center) in walk.iter().enumerate() {
            let lo = i.saturating_sub(window);
            let hi = (i + window + 1).min(walk.len());
            for (j, &context) in walk.iter().enumerate().take(hi).skip(lo) {
                if j != i {
                    pairs.push((center, context));
                }
            }
        }
    }
    pairs
}
