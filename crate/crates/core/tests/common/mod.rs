//! Brute-force oracles shared by the integration test targets.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use fedgraph::graph::{topology_metric, LocalGraph, TopologyMetricKind};

/// Graphs as neighbour bitmasks, vertex `v` adjacent to `u` when bit `u` of
/// `adj[v]` is set.
pub type Masks = Vec<u8>;

fn pair_code(adj: &[u8], order: &[usize]) -> u32 {
    let n = order.len();
    let mut code = 0u32;
    let mut bit = 0;
    for i in 0..n {
        for j in i + 1..n {
            if adj[order[i]] >> order[j] & 1 == 1 {
                code |= 1 << bit;
            }
            bit += 1;
        }
    }
    code
}

/// Colour refinement with colours named by sorted signatures, so the
/// ordered cells are an isomorphism invariant.
fn refined_cells(adj: &[u8]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut color: Vec<usize> = (0..n).map(|v| adj[v].count_ones() as usize).collect();
    loop {
        let sigs: Vec<(usize, Vec<usize>)> = (0..n)
            .map(|v| {
                let mut around: Vec<usize> = (0..n).filter(|&u| adj[v] >> u & 1 == 1).map(|u| color[u]).collect();
                around.sort_unstable();
                (color[v], around)
            })
            .collect();
        let distinct: Vec<&(usize, Vec<usize>)> = sigs.iter().collect::<BTreeSet<_>>().into_iter().collect();
        let next: Vec<usize> = sigs.iter().map(|s| distinct.binary_search(&s).unwrap()).collect();
        let before = color.iter().collect::<HashSet<_>>().len();
        color = next;
        if distinct.len() == before {
            break;
        }
    }
    let classes = color.iter().max().map_or(0, |m| m + 1);
    (0..classes).map(|c| (0..n).filter(|&v| color[v] == c).collect()).filter(|c: &Vec<usize>| !c.is_empty()).collect()
}

fn best_code(adj: &[u8], cells: &[Vec<usize>], order: &mut Vec<usize>, used: &mut [bool], best: &mut u32) {
    if order.len() == adj.len() {
        *best = (*best).min(pair_code(adj, order));
        return;
    }
    let mut filled = 0;
    let cell = cells.iter().find(|c| {
        filled += c.len();
        filled > order.len()
    });
    for &v in cell.expect("positions remain") {
        if !used[v] {
            used[v] = true;
            order.push(v);
            best_code(adj, cells, order, used, best);
            order.pop();
            used[v] = false;
        }
    }
}

/// Smallest pair code over orderings that respect the refined cells.
pub fn canonical(adj: &[u8]) -> u32 {
    let cells = refined_cells(adj);
    let mut best = u32::MAX;
    best_code(adj, &cells, &mut Vec::new(), &mut vec![false; adj.len()], &mut best);
    best
}

fn decode(n: usize, code: u32) -> Masks {
    let mut adj = vec![0u8; n];
    let mut bit = 0;
    for i in 0..n {
        for j in i + 1..n {
            if code >> bit & 1 == 1 {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
            bit += 1;
        }
    }
    adj
}

/// One representative of every isomorphism class of simple graphs with
/// `1..=max_nodes` vertices, grouped by vertex count. Every graph on `n`
/// vertices is some graph on `n - 1` vertices plus one vertex, so extending
/// each class by every neighbour set reaches them all.
pub fn all_graphs(max_nodes: usize) -> Vec<Vec<Masks>> {
    assert!((1..=8).contains(&max_nodes));
    let mut levels = vec![vec![vec![0u8]]];
    for n in 2..=max_nodes {
        let mut codes = BTreeSet::new();
        for g in levels.last().unwrap() {
            for subset in 0u16..(1 << (n - 1)) {
                let mut adj = g.clone();
                adj.push(subset as u8);
                for (u, mask) in adj.iter_mut().enumerate().take(n - 1) {
                    if subset >> u & 1 == 1 {
                        *mask |= 1 << (n - 1);
                    }
                }
                codes.insert(canonical(&adj));
            }
        }
        levels.push(codes.into_iter().map(|c| decode(n, c)).collect());
    }
    levels
}

pub fn to_graph(adj: &[u8]) -> LocalGraph {
    let names: Vec<String> = (0..adj.len()).map(|v| format!("v{v}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut edges = Vec::new();
    for a in 0..adj.len() {
        for b in a + 1..adj.len() {
            if adj[a] >> b & 1 == 1 {
                edges.push((names[a].clone(), names[b].clone()));
            }
        }
    }
    LocalGraph::unattributed(&refs, edges).unwrap()
}

fn linked(adj: &[u8], a: usize, b: usize) -> bool {
    adj[a] >> b & 1 == 1
}

fn degree(adj: &[u8], v: usize) -> usize {
    adj[v].count_ones() as usize
}

/// Floyd-Warshall hop distances, `usize::MAX` when unreachable.
fn hops(adj: &[u8]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut d = vec![vec![usize::MAX; n]; n];
    for a in 0..n {
        d[a][a] = 0;
        for b in 0..n {
            if linked(adj, a, b) {
                d[a][b] = 1;
            }
        }
    }
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                if d[a][k] != usize::MAX && d[k][b] != usize::MAX {
                    d[a][b] = d[a][b].min(d[a][k] + d[k][b]);
                }
            }
        }
    }
    d
}

fn walk_paths(adj: &[u8], path: &mut Vec<usize>, target: usize, len: usize, out: &mut Vec<Vec<usize>>) {
    let last = *path.last().unwrap();
    if path.len() == len + 1 {
        if last == target {
            out.push(path.clone());
        }
        return;
    }
    for w in 0..adj.len() {
        if linked(adj, last, w) && !path.contains(&w) {
            path.push(w);
            walk_paths(adj, path, target, len, out);
            path.pop();
        }
    }
}

/// Sum over unordered pairs of the fraction of shortest paths through each
/// vertex, listing every path explicitly.
pub fn betweenness(adj: &[u8]) -> Vec<f64> {
    let n = adj.len();
    let d = hops(adj);
    let mut out = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            if d[s][t] == usize::MAX {
                continue;
            }
            let mut paths = Vec::new();
            walk_paths(adj, &mut vec![s], t, d[s][t], &mut paths);
            for (v, c) in out.iter_mut().enumerate() {
                if v != s && v != t {
                    *c += paths.iter().filter(|p| p.contains(&v)).count() as f64 / paths.len() as f64;
                }
            }
        }
    }
    out
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

/// Stationary vector of the damped walk, by solving the linear system.
pub fn pagerank(adj: &[u8], damping: f64) -> Vec<f64> {
    let n = adj.len();
    let mut a = vec![vec![0.0; n]; n];
    for w in 0..n {
        a[w][w] += 1.0;
        for v in 0..n {
            let share = if degree(adj, v) == 0 {
                1.0 / n as f64
            } else if linked(adj, v, w) {
                1.0 / degree(adj, v) as f64
            } else {
                0.0
            };
            a[w][v] -= damping * share;
        }
    }
    solve(a, vec![(1.0 - damping) / n as f64; n])
}

pub fn clustering(adj: &[u8]) -> Vec<f64> {
    let n = adj.len();
    (0..n)
        .map(|v| {
            let around: Vec<usize> = (0..n).filter(|&u| linked(adj, v, u)).collect();
            if around.len() < 2 {
                return 0.0;
            }
            let mut closed = 0;
            let mut possible = 0;
            for (i, &a) in around.iter().enumerate() {
                for &b in &around[i + 1..] {
                    possible += 1;
                    closed += usize::from(linked(adj, a, b));
                }
            }
            closed as f64 / possible as f64
        })
        .collect()
}

pub fn knn_degree(adj: &[u8]) -> Vec<f64> {
    let n = adj.len();
    (0..n)
        .map(|v| {
            let around: Vec<usize> = (0..n).filter(|&u| linked(adj, v, u)).collect();
            if around.is_empty() {
                0.0
            } else {
                around.iter().map(|&u| degree(adj, u) as f64).sum::<f64>() / around.len() as f64
            }
        })
        .collect()
}

/// The four checked metrics with their oracle and tolerance.
pub fn oracles() -> Vec<(TopologyMetricKind, fn(&[u8]) -> Vec<f64>, f64)> {
    vec![
        (TopologyMetricKind::Betweenness, betweenness as fn(&[u8]) -> Vec<f64>, 1e-9),
        (TopologyMetricKind::PageRank, |adj| pagerank(adj, 0.85), 1e-7),
        (TopologyMetricKind::ClusteringCoefficient, clustering, 1e-12),
        (TopologyMetricKind::KnnDegree, knn_degree, 1e-12),
    ]
}

/// Graphs checked and a description of every disagreement.
pub fn metric_sweep(max_nodes: usize) -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for level in all_graphs(max_nodes) {
        for adj in level {
            let g = to_graph(&adj);
            for (kind, oracle, tol) in oracles() {
                let got = topology_metric(&g, kind);
                let want = oracle(&adj);
                if got.iter().zip(&want).any(|(a, b)| (a - b).abs() > tol) {
                    mismatches.push(format!("{kind} on {adj:?}: {got:?} vs {want:?}"));
                }
            }
            checked += 1;
        }
    }
    (checked, mismatches)
}

/// AUC by comparing every positive with every negative pair.
pub fn auc_oracle(x: &[Vec<f64>], positives: &[(usize, usize)], known: &[(usize, usize)]) -> f64 {
    let n = x.len();
    let norm = |a: usize, b: usize| (a.min(b), a.max(b));
    let pos: BTreeSet<_> = positives.iter().map(|&(a, b)| norm(a, b)).collect();
    let skip: BTreeSet<_> = pos.iter().copied().chain(known.iter().map(|&(a, b)| norm(a, b))).collect();
    let score = |(a, b): (usize, usize)| -x[a].iter().zip(&x[b]).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let neg: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|p| !skip.contains(p)).collect();
    let mut wins = 0.0;
    for &p in &pos {
        for &q in &neg {
            let (sp, sq) = (score(p), score(q));
            wins += if sp > sq {
                1.0
            } else if sp == sq {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Precision@L by ranking each candidate pair against all others: a pair is
/// selected when fewer than `l` candidates beat it.
pub fn precision_oracle(x: &[Vec<f64>], training: &[(usize, usize)], held_out: &[(usize, usize)], l: usize) -> f64 {
    let n = x.len();
    let norm = |a: usize, b: usize| (a.min(b), a.max(b));
    let train: BTreeSet<_> = training.iter().map(|&(a, b)| norm(a, b)).collect();
    let truth: BTreeSet<_> = held_out.iter().map(|&(a, b)| norm(a, b)).collect();
    let d = |(a, b): (usize, usize)| x[a].iter().zip(&x[b]).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    let cands: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|p| !train.contains(p)).collect();
    let l = l.min(cands.len());
    let selected: Vec<_> = cands
        .iter()
        .filter(|&&c| cands.iter().filter(|&&o| d(o) < d(c) || (d(o) == d(c) && o < c)).count() < l)
        .collect();
    assert_eq!(selected.len(), l);
    selected.iter().filter(|c| truth.contains(c)).count() as f64 / l as f64
}
