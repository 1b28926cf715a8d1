use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_rows, sq_dist};
use crate::error::{Error, Result};
use crate::seed;

/// Label of DBSCAN noise points.
pub const NOISE: i64 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ClusterMethod {
    Kmeans {
        k: usize,
        #[serde(default = "default_restarts")]
        restarts: usize,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
    Dbscan {
        eps: f64,
        min_pts: usize,
    },
}

fn default_restarts() -> usize {
    KMEANS_MAX_RESTARTS
}

fn default_max_iter() -> usize {
    300
}

pub const KMEANS_MAX_RESTARTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub labels: Vec<i64>,
    pub clusters: usize,
    /// k-means only.
    pub centroids: Vec<Vec<f64>>,
    /// Objective after each iteration of the best k-means restart.
    pub inertia_history: Vec<f64>,
}

pub fn cluster(x: &[Vec<f64>], method: &ClusterMethod, seed: u64) -> Result<Clustering> {
    match *method {
        ClusterMethod::Kmeans { k, restarts, max_iter } => kmeans(x, k, restarts, max_iter, seed),
        ClusterMethod::Dbscan { eps, min_pts } => dbscan(x, eps, min_pts),
    }
}

fn plus_plus_seeds<R: Rng>(x: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![x[rng.random_range(0..x.len())].clone()];
    let mut nearest: Vec<f64> = x.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = x.len() - 1;
            for (i, d) in nearest.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..x.len())
        };
        centroids.push(x[next].clone());
        for (n, p) in nearest.iter_mut().zip(x) {
            *n = n.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

fn assign(x: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = x
        .iter()
        .map(|p| {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(c, m)| (c, sq_dist(p, m)))
                .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
            inertia += d;
            best
        })
        .collect();
    (labels, inertia)
}

fn update(x: &[Vec<f64>], labels: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = x[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &l) in x.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for ((c, s), n) in centroids.iter_mut().zip(sums).zip(counts) {
        // an emptied cluster keeps its centroid
        if n > 0 {
            *c = s.into_iter().map(|v| v / n as f64).collect();
        }
    }
}

/// Lloyd's algorithm from k-means++ seeds; the restart with the lowest
/// objective wins.
pub fn kmeans(x: &[Vec<f64>], k: usize, restarts: usize, max_iter: usize, seed: u64) -> Result<Clustering> {
    check_rows(x)?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > x.len() {
        return Err(Error::invalid(format!("k = {k} exceeds the {} rows", x.len())));
    }
    let restarts = restarts.clamp(1, KMEANS_MAX_RESTARTS);
    let mut best: Option<(Vec<usize>, Vec<Vec<f64>>, Vec<f64>)> = None;
    for r in 0..restarts {
        let mut rng = seed::derive_rng(seed, &[b"kmeans", &(r as u64).to_le_bytes()]);
        let mut centroids = plus_plus_seeds(x, k, &mut rng);
        let (mut labels, mut inertia) = assign(x, &centroids);
        let mut history = vec![inertia];
        for _ in 0..max_iter {
            update(x, &labels, &mut centroids);
            let (next, next_inertia) = assign(x, &centroids);
            history.push(next_inertia);
            let stable = next == labels;
            labels = next;
            inertia = next_inertia;
            if stable {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| inertia < *b.2.last().expect("history")) {
            best = Some((labels, centroids, history));
        }
    }
    let (labels, centroids, inertia_history) = best.expect("at least one restart");
    Ok(Clustering { labels: labels.into_iter().map(|l| l as i64).collect(), clusters: k, centroids, inertia_history })
}

pub fn dbscan(x: &[Vec<f64>], eps: f64, min_pts: usize) -> Result<Clustering> {
    check_rows(x)?;
    if eps <= 0.0 || !eps.is_finite() {
        return Err(Error::invalid("eps must be positive"));
    }
    if min_pts == 0 {
        return Err(Error::invalid("min_pts must be at least 1"));
    }
    let n = x.len();
    let eps2 = eps * eps;
    // neighbourhoods include the point itself
    let neighbours: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| sq_dist(&x[i], &x[j]) <= eps2).collect()).collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut labels = vec![NOISE; n];
    let mut next = 0i64;
    for i in 0..n {
        if labels[i] != NOISE || !core[i] {
            continue;
        }
        labels[i] = next;
        let mut stack = vec![i];
        while let Some(p) = stack.pop() {
            for &q in &neighbours[p] {
                if labels[q] == NOISE {
                    labels[q] = next;
                    if core[q] {
                        stack.push(q);
                    }
                }
            }
        }
        next += 1;
    }
    Ok(Clustering { labels, clusters: next as usize, centroids: Vec::new(), inertia_history: Vec::new() })
}
