use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Cosine,
}

impl DistanceMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceMetric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            DistanceMetric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (na * nb)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionConfig {
    pub metric: DistanceMetric,
    /// Target edge count; the sum of the parties' reported edge counts when
    /// absent.
    pub target_edges: Option<usize>,
    /// Hard cap on released edges.
    pub max_edges: Option<usize>,
    /// Half-width of uniform noise added to every distance.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self { metric: DistanceMetric::Euclidean, target_edges: None, max_edges: None, jitter: 0.0, seed: 0 }
    }
}

impl ReconstructionConfig {
    /// Edge count to reconstruct given the reported total, capped by
    /// `max_edges` and by the number of pairs.
    pub fn edge_budget(&self, reported_edges: usize, nodes: usize) -> usize {
        let pairs = nodes * nodes.saturating_sub(1) / 2;
        let mut target = self.target_edges.unwrap_or(reported_edges);
        if let Some(cap) = self.max_edges {
            target = target.min(cap);
        }
        target.min(pairs)
    }
}

/// A candidate pair. Ordered by distance, then by the row pair, so the heap
/// order is total and ties are deterministic.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist: f64,
    i: u32,
    j: u32,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.i.cmp(&other.i)).then(self.j.cmp(&other.j))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

/// Bounded max-heap keeping the `capacity` smallest candidates seen.
struct TopK {
    capacity: usize,
    heap: BinaryHeap<Candidate>,
}

impl TopK {
    fn new(capacity: usize) -> Self {
        Self { capacity, heap: BinaryHeap::with_capacity(capacity + 1) }
    }

    fn offer(&mut self, c: Candidate) {
        if self.heap.len() < self.capacity {
            self.heap.push(c);
        } else if let Some(worst) = self.heap.peek() {
            if c < *worst {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    fn into_sorted(self) -> Vec<Candidate> {
        self.heap.into_sorted_vec()
    }
}

/// Ranked pair with its (possibly jittered) distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    pub a: u32,
    pub b: u32,
    pub distance: f64,
}

/// The `target` closest unordered pairs of rows, closest first, with ties
/// broken by the lexicographic row pair.
pub fn reconstruct_structure(points: &[Vec<f64>], target: usize, metric: DistanceMetric) -> Result<Vec<(u32, u32)>> {
    Ok(nearest_pairs(points, target, metric, 0.0, 0)?.into_iter().map(|p| (p.a, p.b)).collect())
}

/// As [`reconstruct_structure`], with each distance perturbed by uniform
/// noise in `[-jitter, jitter]` drawn from a stream seeded per pair.
pub fn nearest_pairs(
    points: &[Vec<f64>],
    target: usize,
    metric: DistanceMetric,
    jitter: f64,
    jitter_seed: u64,
) -> Result<Vec<RankedPair>> {
    let n = points.len();
    let pairs = n * n.saturating_sub(1) / 2;
    if target > pairs {
        return Err(Error::invalid(format!("cannot select {target} edges from {pairs} pairs")));
    }
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::invalid("jitter must be a non-negative finite number"));
    }
    if let Some(first) = points.first() {
        if first.is_empty() {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        if let Some(bad) = points.iter().find(|p| p.len() != first.len()) {
            return Err(Error::DimensionMismatch { expected: first.len(), actual: bad.len() });
        }
    }
    let mut top = TopK::new(target);
    if target > 0 {
        for i in 0..n {
            for j in i + 1..n {
                let mut dist = metric.distance(&points[i], &points[j]);
                if jitter > 0.0 {
                    let mut rng = seed::derive_rng(
                        jitter_seed,
                        &[b"jitter", &(i as u64).to_le_bytes(), &(j as u64).to_le_bytes()],
                    );
                    dist += rng.random_range(-jitter..=jitter);
                }
                top.offer(Candidate { dist, i: i as u32, j: j as u32 });
            }
        }
    }
    Ok(top.into_sorted().into_iter().map(|c| RankedPair { a: c.i, b: c.j, distance: c.dist }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn full_sort(points: &[Vec<f64>], target: usize) -> Vec<(u32, u32)> {
        let mut all = Vec::new();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                all.push((DistanceMetric::Euclidean.distance(&points[i], &points[j]), i as u32, j as u32));
            }
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        all.into_iter().take(target).map(|(_, i, j)| (i, j)).collect()
    }

    #[test]
    fn collinear_points() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        assert_eq!(reconstruct_structure(&pts, 2, DistanceMetric::Euclidean).unwrap(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn all_pairs_gives_complete_graph() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 1.7, (i * i) as f64]).collect();
        let mut edges = reconstruct_structure(&pts, 10, DistanceMetric::Euclidean).unwrap();
        edges.sort();
        let expected: Vec<(u32, u32)> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
        assert_eq!(edges, expected);
    }

    #[test]
    fn too_many_edges_rejected() {
        assert!(reconstruct_structure(&[vec![0.0], vec![1.0]], 2, DistanceMetric::Euclidean).is_err());
    }

    #[test]
    fn ties_break_lexicographically() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        assert_eq!(reconstruct_structure(&pts, 2, DistanceMetric::Euclidean).unwrap(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn heap_matches_full_sort_on_random_instances() {
        let mut rng = crate::seed::rng(8);
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..50).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            assert_eq!(reconstruct_structure(&pts, 100, DistanceMetric::Euclidean).unwrap(), full_sort(&pts, 100));
        }
    }

    #[test]
    fn cosine_ignores_scale() {
        let m = DistanceMetric::Cosine;
        assert!(m.distance(&[1.0, 1.0], &[3.0, 3.0]).abs() < 1e-12);
        assert_eq!(m.distance(&[0.0, 0.0], &[1.0, 0.0]), 1.0);
    }

    #[test]
    fn jitter_is_seeded() {
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let a = nearest_pairs(&pts, 5, DistanceMetric::Euclidean, 0.7, 3).unwrap();
        let b = nearest_pairs(&pts, 5, DistanceMetric::Euclidean, 0.7, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_respects_cap_and_pairs() {
        let cfg = ReconstructionConfig { max_edges: Some(4), ..Default::default() };
        assert_eq!(cfg.edge_budget(10, 100), 4);
        assert_eq!(ReconstructionConfig::default().edge_budget(10, 3), 3);
    }

    proptest! {
        #[test]
        fn invariant_under_row_permutation(
            coords in proptest::collection::vec(-5i32..5, 8..24),
            target in 0usize..6,
            order_seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            // integer coordinates produce plenty of exact ties
            let pts: Vec<Vec<f64>> = coords.chunks(2).filter(|c| c.len() == 2).map(|c| vec![c[0] as f64, c[1] as f64]).collect();
            let n = pts.len();
            let target = target.min(n * (n - 1) / 2);
            let edges = reconstruct_structure(&pts, target, DistanceMetric::Euclidean).unwrap();
            prop_assert_eq!(&edges, &full_sort(&pts, target));

            let mut stream = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    stream.push(Candidate { dist: DistanceMetric::Euclidean.distance(&pts[i], &pts[j]), i: i as u32, j: j as u32 });
                }
            }
            stream.shuffle(&mut crate::seed::rng(order_seed));
            let mut top = TopK::new(target);
            for c in stream {
                top.offer(c);
            }
            let shuffled: Vec<(u32, u32)> = top.into_sorted().into_iter().map(|c| (c.i, c.j)).collect();
            prop_assert_eq!(shuffled, edges);
        }
    }
}
