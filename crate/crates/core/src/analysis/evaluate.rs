use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_rows, sq_dist};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub folds: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { folds: 5, epochs: 500, learning_rate: 0.1, l2: 1e-4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub mean: f64,
    pub std: f64,
    pub folds: Vec<f64>,
}

/// Multinomial logistic regression by full-batch gradient descent on
/// standardized, sample-weighted rows.
struct Logistic {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// classes x (dim + 1), bias last.
    w: Vec<Vec<f64>>,
}

impl Logistic {
    fn fit(x: &[&[f64]], y: &[usize], weight: &[f64], classes: usize, cfg: &ProbeConfig) -> Self {
        let dim = x[0].len();
        let total: f64 = weight.iter().sum();
        let mut mean = vec![0.0; dim];
        for (r, w) in x.iter().zip(weight) {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += w * v / total;
            }
        }
        let mut scale = vec![0.0; dim];
        for (r, w) in x.iter().zip(weight) {
            for ((s, v), m) in scale.iter_mut().zip(r.iter()).zip(&mean) {
                *s += w * (v - m) * (v - m) / total;
            }
        }
        let scale: Vec<f64> = scale.into_iter().map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
        let mut model = Self { mean, scale, w: vec![vec![0.0; dim + 1]; classes] };
        let z: Vec<Vec<f64>> = x.iter().map(|r| model.standardize(r)).collect();
        for _ in 0..cfg.epochs {
            let mut grad = vec![vec![0.0; dim + 1]; classes];
            for ((zi, &yi), &wi) in z.iter().zip(y).zip(weight) {
                let p = model.softmax(zi);
                for c in 0..classes {
                    let err = wi / total * (p[c] - if c == yi { 1.0 } else { 0.0 });
                    for (g, v) in grad[c].iter_mut().zip(zi.iter().chain(std::iter::once(&1.0))) {
                        *g += err * v;
                    }
                }
            }
            for (wc, gc) in model.w.iter_mut().zip(&grad) {
                for (j, (w, g)) in wc.iter_mut().zip(gc).enumerate() {
                    let decay = if j < dim { cfg.l2 * *w } else { 0.0 };
                    *w -= cfg.learning_rate * (g + decay);
                }
            }
        }
        model
    }

    fn standardize(&self, r: &[f64]) -> Vec<f64> {
        r.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    fn softmax(&self, z: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .w
            .iter()
            .map(|wc| wc[..z.len()].iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + wc[z.len()])
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    fn predict(&self, r: &[f64]) -> usize {
        let p = self.softmax(&self.standardize(r));
        (0..p.len()).fold(0, |best, c| if p[c] > p[best] { c } else { best })
    }
}

/// k-fold accuracy of a logistic probe.
///
/// Identical (row, label) samples form one group that always lands in a
/// single fold and is trained on with its multiplicity as weight, so
/// replicating the data set leaves every fold unchanged. Groups are spread
/// over folds per class.
pub fn eval_classification(x: &[Vec<f64>], labels: &[usize], cfg: &ProbeConfig) -> Result<ProbeResult> {
    check_rows(x)?;
    if x.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: labels.len() });
    }
    if cfg.folds < 2 {
        return Err(Error::invalid("need at least two folds"));
    }
    let mut group_of: HashMap<(Vec<u64>, usize), usize> = HashMap::new();
    let mut groups: Vec<(usize, usize, f64)> = Vec::new(); // (first row, label, multiplicity)
    for (i, (r, &l)) in x.iter().zip(labels).enumerate() {
        let key = (r.iter().map(|v| v.to_bits()).collect(), l);
        match group_of.get(&key) {
            Some(&g) => groups[g].2 += 1.0,
            None => {
                group_of.insert(key, groups.len());
                groups.push((i, l, 1.0));
            }
        }
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (g, (_, l, _)) in groups.iter().enumerate() {
        by_class.entry(*l).or_default().push(g);
    }
    if by_class.len() < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if let Some((c, members)) = by_class.iter().find(|(_, m)| m.len() < cfg.folds) {
        return Err(Error::invalid(format!(
            "class {c} has {} distinct samples, fewer than {} folds",
            members.len(),
            cfg.folds
        )));
    }
    let class_index: BTreeMap<usize, usize> = by_class.keys().enumerate().map(|(i, c)| (*c, i)).collect();
    let mut fold_of = vec![0usize; groups.len()];
    let mut rng = seed::derive_rng(cfg.seed, &[b"folds"]);
    let mut offset = 0;
    for members in by_class.values() {
        let mut members = members.clone();
        members.shuffle(&mut rng);
        for (i, g) in members.into_iter().enumerate() {
            fold_of[g] = (offset + i) % cfg.folds;
        }
        offset += 1;
    }
    let mut accuracies = Vec::with_capacity(cfg.folds);
    for f in 0..cfg.folds {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..groups.len()).partition(|&g| fold_of[g] != f);
        let rows: Vec<&[f64]> = train.iter().map(|&g| x[groups[g].0].as_slice()).collect();
        let ys: Vec<usize> = train.iter().map(|&g| class_index[&groups[g].1]).collect();
        let ws: Vec<f64> = train.iter().map(|&g| groups[g].2).collect();
        let model = Logistic::fit(&rows, &ys, &ws, class_index.len(), cfg);
        let (mut right, mut total) = (0.0, 0.0);
        for &g in &test {
            let (row, label, m) = groups[g];
            if model.predict(&x[row]) == class_index[&label] {
                right += m;
            }
            total += m;
        }
        accuracies.push(right / total);
    }
    let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    let std = (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accuracies.len() as f64).sqrt();
    Ok(ProbeResult { mean, std, folds: accuracies })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Exact, by rank sum.
pub fn auc_from_scores(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::invalid("AUC needs at least one positive and one negative"));
    }
    let mut all: Vec<(f64, bool)> =
        positives.iter().map(|&s| (s, true)).chain(negatives.iter().map(|&s| (s, false))).collect();
    if all.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::NonFinite("AUC score".into()));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // average 1-based rank of the tie block
        let rank = (i + j + 1) as f64 / 2.0;
        rank_sum += rank * all[i..j].iter().filter(|(_, p)| *p).count() as f64;
        i = j;
    }
    let (p, n) = (positives.len() as f64, negatives.len() as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

fn pair(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn score(x: &[Vec<f64>], (a, b): (usize, usize)) -> f64 {
    -sq_dist(&x[a], &x[b]).sqrt()
}

pub const DEFAULT_AUC_PAIRS: usize = 10_000_000;

/// Link-prediction AUC with score `-distance(u, v)`.
///
/// Negatives are pairs that are neither positive nor in `known`. When
/// `sampled` covers every positive/negative comparison the AUC is exact;
/// otherwise `sampled` random comparisons are drawn.
pub fn eval_link_auc(
    x: &[Vec<f64>],
    positives: &[(usize, usize)],
    known: &[(usize, usize)],
    sampled: usize,
    seed: u64,
) -> Result<f64> {
    check_rows(x)?;
    let n = x.len();
    if positives.iter().any(|&(a, b)| a >= n || b >= n || a == b) {
        return Err(Error::invalid("positive pair out of range or a self pair"));
    }
    let pos: HashSet<(usize, usize)> = positives.iter().map(|&(a, b)| pair(a, b)).collect();
    let excluded: HashSet<(usize, usize)> = pos.iter().copied().chain(known.iter().map(|&(a, b)| pair(a, b))).collect();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let negatives = total_pairs.saturating_sub(excluded.len());
    if pos.is_empty() || negatives == 0 {
        return Err(Error::invalid("AUC needs at least one positive and one negative pair"));
    }
    let pos_scores: Vec<f64> = pos.iter().map(|&p| score(x, p)).collect();
    if sampled as u128 >= pos.len() as u128 * negatives as u128 {
        let mut neg = Vec::with_capacity(negatives);
        for a in 0..n {
            for b in a + 1..n {
                if !excluded.contains(&(a, b)) {
                    neg.push(score(x, (a, b)));
                }
            }
        }
        return auc_from_scores(&pos_scores, &neg);
    }
    let mut rng = seed::derive_rng(seed, &[b"auc"]);
    let mut wins = 0.0;
    for _ in 0..sampled {
        let p = pos_scores[rng.random_range(0..pos_scores.len())];
        let q = loop {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b && !excluded.contains(&pair(a, b)) {
                break score(x, pair(a, b));
            }
        };
        wins += if p > q {
            1.0
        } else if p == q {
            0.5
        } else {
            0.0
        };
    }
    Ok(wins / sampled as f64)
}

/// Fraction of the `l` closest pairs outside `training` that are in
/// `held_out`. Ties between equal distances go to the smaller row pair.
pub fn eval_precision_at_l(
    x: &[Vec<f64>],
    training: &[(usize, usize)],
    held_out: &[(usize, usize)],
    l: usize,
) -> Result<f64> {
    check_rows(x)?;
    if l == 0 {
        return Err(Error::invalid("L must be at least 1"));
    }
    let n = x.len();
    let train: HashSet<(usize, usize)> = training.iter().map(|&(a, b)| pair(a, b)).collect();
    let truth: HashSet<(usize, usize)> = held_out.iter().map(|&(a, b)| pair(a, b)).collect();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if !train.contains(&(a, b)) {
                candidates.push((sq_dist(&x[a], &x[b]), a, b));
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate pairs"));
    }
    let take = if l > candidates.len() {
        log::warn!("L = {l} exceeds the {} candidate pairs; clamped", candidates.len());
        candidates.len()
    } else {
        l
    };
    candidates.sort_by(|p, q| p.0.total_cmp(&q.0).then((p.1, p.2).cmp(&(q.1, q.2))));
    let hits = candidates[..take].iter().filter(|(_, a, b)| truth.contains(&(*a, *b))).count();
    Ok(hits as f64 / take as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub probe: ProbeConfig,
    pub auc_pairs: usize,
    pub precision_l: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { probe: ProbeConfig::default(), auc_pairs: DEFAULT_AUC_PAIRS, precision_l: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: Option<ProbeResult>,
    pub link_auc: Option<f64>,
    pub precision_at_l: Option<f64>,
    pub config: EvaluationConfig,
}
