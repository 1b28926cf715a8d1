use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::check_rows;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsolationForestParams {
    pub trees: usize,
    pub subsample: usize,
    /// Fraction of rows flagged.
    pub contamination: f64,
}

impl Default for IsolationForestParams {
    fn default() -> Self {
        Self { trees: 100, subsample: 256, contamination: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyResult {
    /// Score in (0, 1]; higher is more anomalous.
    pub scores: Vec<f64>,
    /// Flagged rows, most anomalous first.
    pub flagged: Vec<usize>,
}

enum Node {
    Leaf { size: usize },
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

/// Average unsuccessful-search path length in a binary search tree of `n`
/// points.
fn average_path(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + 0.577_215_664_901_532_9) - 2.0 * (n - 1.0) / n
        }
    }
}

fn build(x: &[Vec<f64>], rows: &mut [usize], depth: usize, limit: usize, rng: &mut ChaCha8Rng) -> Node {
    if depth >= limit || rows.len() <= 1 {
        return Node::Leaf { size: rows.len() };
    }
    let dims = x[0].len();
    let spans: Vec<(usize, f64, f64)> = (0..dims)
        .filter_map(|f| {
            let (lo, hi) = rows
                .iter()
                .map(|&r| x[r][f])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            (hi > lo).then_some((f, lo, hi))
        })
        .collect();
    if spans.is_empty() {
        return Node::Leaf { size: rows.len() };
    }
    let (feature, lo, hi) = spans[rng.random_range(0..spans.len())];
    let threshold = rng.random_range(lo..hi);
    let mut split = 0;
    for i in 0..rows.len() {
        if x[rows[i]][feature] < threshold {
            rows.swap(i, split);
            split += 1;
        }
    }
    let (l, r) = rows.split_at_mut(split);
    Node::Split {
        feature,
        threshold,
        left: Box::new(build(x, l, depth + 1, limit, rng)),
        right: Box::new(build(x, r, depth + 1, limit, rng)),
    }
}

fn path_length(node: &Node, p: &[f64], depth: usize) -> f64 {
    match node {
        Node::Leaf { size } => depth as f64 + average_path(*size),
        Node::Split { feature, threshold, left, right } => {
            if p[*feature] < *threshold {
                path_length(left, p, depth + 1)
            } else {
                path_length(right, p, depth + 1)
            }
        }
    }
}

pub fn isolation_forest(x: &[Vec<f64>], params: &IsolationForestParams, seed: u64) -> Result<AnomalyResult> {
    check_rows(x)?;
    let n = x.len();
    if n < 8 {
        return Err(Error::invalid(format!("isolation forest needs at least 8 rows, got {n}")));
    }
    if params.trees == 0 || params.subsample < 2 {
        return Err(Error::invalid("need at least one tree and a subsample of two"));
    }
    if !(0.0..=1.0).contains(&params.contamination) {
        return Err(Error::invalid("contamination must lie in [0, 1]"));
    }
    let psi = params.subsample.min(n);
    let limit = (psi as f64).log2().ceil() as usize;
    let trees: Vec<Node> = (0..params.trees)
        .map(|t| {
            let mut rng = seed::derive_rng(seed, &[b"iforest", &(t as u64).to_le_bytes()]);
            let mut rows = sample(&mut rng, n, psi).into_vec();
            build(x, &mut rows, 0, limit, &mut rng)
        })
        .collect();
    let c = average_path(psi);
    let scores: Vec<f64> = x
        .iter()
        .map(|p| {
            let mean = trees.iter().map(|t| path_length(t, p, 0)).sum::<f64>() / trees.len() as f64;
            2f64.powf(-mean / c)
        })
        .collect();
    let flag_count = (params.contamination * n as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(flag_count);
    Ok(AnomalyResult { scores, flagged: order })
}
