//! Per-node topology metrics, computed only on the client that owns the graph.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LocalGraph;
use crate::error::Error;

const PAGERANK_DAMPING: f64 = 0.85;
const PAGERANK_TOLERANCE: f64 = 1e-9;
const PAGERANK_MAX_ITER: usize = 200;
const EIGENVECTOR_TOLERANCE: f64 = 1e-9;
const EIGENVECTOR_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyMetricKind {
    Degree,
    Betweenness,
    Eigenvector,
    PageRank,
    ClusteringCoefficient,
    KnnDegree,
}

impl TopologyMetricKind {
    pub const ALL: [TopologyMetricKind; 6] = [
        TopologyMetricKind::Degree,
        TopologyMetricKind::Betweenness,
        TopologyMetricKind::Eigenvector,
        TopologyMetricKind::PageRank,
        TopologyMetricKind::ClusteringCoefficient,
        TopologyMetricKind::KnnDegree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TopologyMetricKind::Degree => "degree",
            TopologyMetricKind::Betweenness => "betweenness",
            TopologyMetricKind::Eigenvector => "eigenvector",
            TopologyMetricKind::PageRank => "page_rank",
            TopologyMetricKind::ClusteringCoefficient => "clustering_coefficient",
            TopologyMetricKind::KnnDegree => "knn_degree",
        }
    }
}

impl fmt::Display for TopologyMetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyMetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        TopologyMetricKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown topology metric `{s}`")))
    }
}

/// Compute one metric for every node. The result is aligned with
/// [`LocalGraph::node_ids`].
pub fn topology_metric(g: &LocalGraph, kind: TopologyMetricKind) -> Vec<f64> {
    metric_on_adjacency(g.adjacency(), kind)
}

pub(crate) fn metric_on_adjacency(adj: &[Vec<usize>], kind: TopologyMetricKind) -> Vec<f64> {
    match kind {
        TopologyMetricKind::Degree => adj.iter().map(|n| n.len() as f64).collect(),
        TopologyMetricKind::Betweenness => betweenness(adj),
        TopologyMetricKind::Eigenvector => eigenvector(adj),
        TopologyMetricKind::PageRank => pagerank(adj),
        TopologyMetricKind::ClusteringCoefficient => clustering(adj),
        TopologyMetricKind::KnnDegree => knn_degree(adj),
    }
}

/// Brandes' algorithm; each unordered pair is counted once.
fn betweenness(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let mut centrality = vec![0.0; n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut stack = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);

    for s in 0..n {
        for v in 0..n {
            preds[v].clear();
            sigma[v] = 0.0;
            dist[v] = usize::MAX;
            delta[v] = 0.0;
        }
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    // every unordered pair was visited from both ends
    centrality.iter_mut().for_each(|c| *c /= 2.0);
    centrality
}

/// Power iteration with uniform teleport; dangling mass is spread uniformly.
fn pagerank(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    if n == 0 {
        return Vec::new();
    }
    let uniform = 1.0 / n as f64;
    let mut rank = vec![uniform; n];
    let mut next = vec![0.0; n];
    for _ in 0..PAGERANK_MAX_ITER {
        let dangling: f64 = (0..n).filter(|&v| adj[v].is_empty()).map(|v| rank[v]).sum();
        let base = (1.0 - PAGERANK_DAMPING) * uniform + PAGERANK_DAMPING * dangling * uniform;
        next.iter_mut().for_each(|x| *x = base);
        for (v, neighbors) in adj.iter().enumerate() {
            if neighbors.is_empty() {
                continue;
            }
            let share = PAGERANK_DAMPING * rank[v] / neighbors.len() as f64;
            for &w in neighbors {
                next[w] += share;
            }
        }
        let change = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut rank, &mut next);
        if change < PAGERANK_TOLERANCE {
            break;
        }
    }
    rank
}

/// Power iteration on `A + I` (same eigenvectors as `A`, no oscillation on
/// bipartite graphs), normalised to unit L2 norm.
fn eigenvector(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    if n == 0 {
        return Vec::new();
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    for _ in 0..EIGENVECTOR_MAX_ITER {
        for v in 0..n {
            next[v] = x[v] + adj[v].iter().map(|&w| x[w]).sum::<f64>();
        }
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        next.iter_mut().for_each(|v| *v /= norm);
        let change = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        if change < EIGENVECTOR_TOLERANCE {
            break;
        }
    }
    x
}

fn clustering(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let mut mark = vec![usize::MAX; n];
    (0..n)
        .map(|v| {
            let k = adj[v].len();
            if k < 2 {
                return 0.0;
            }
            for &u in &adj[v] {
                mark[u] = v;
            }
            let mut links = 0usize;
            for &u in &adj[v] {
                links += adj[u].iter().filter(|&&w| mark[w] == v).count();
            }
            // each neighbour pair was counted from both ends
            let triangles = links as f64 / 2.0;
            triangles / (k * (k - 1) / 2) as f64
        })
        .collect()
}

fn knn_degree(adj: &[Vec<usize>]) -> Vec<f64> {
    adj.iter()
        .map(|neighbors| {
            if neighbors.is_empty() {
                0.0
            } else {
                neighbors.iter().map(|&u| adj[u].len() as f64).sum::<f64>() / neighbors.len() as f64
            }
        })
        .collect()
}
