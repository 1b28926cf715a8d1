//! Skip-gram with negative sampling.
//!
//! Weights are stored as `f32`; every loss and gradient is evaluated in `f64`
//! and the update is rounded back once per step.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::{EmbeddingModelState, SkipGramConfig, WalkCorpus};
use crate::error::{Error, Result};

/// Draws negatives from the unigram^0.75 distribution over the rows that
/// occur in the local corpus.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    rows: Vec<u32>,
    dist: WeightedIndex<f64>,
}

impl NegativeSampler {
    pub fn from_corpus(corpus: &WalkCorpus) -> Result<Self> {
        let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
        for walk in &corpus.walks {
            for &row in walk {
                *counts.entry(row).or_insert(0) += 1;
            }
        }
        Self::from_counts(counts)
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (u32, u64)>) -> Result<Self> {
        let (rows, weights): (Vec<u32>, Vec<f64>) =
            counts.into_iter().filter(|(_, c)| *c > 0).map(|(r, c)| (r, (c as f64).powf(0.75))).unzip();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::invalid(format!("negative sampler needs at least one node: {e}")))?;
        Ok(Self { rows, dist })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.rows[self.dist.sample(rng)]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedPair {
    pub center: u32,
    pub context: u32,
    pub negatives: Vec<u32>,
}

/// A minibatch with its negatives already drawn.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreparedBatch {
    pub pairs: Vec<PreparedPair>,
}

impl PreparedBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Attach `negatives` sampled rows to each pair. Draws that hit the context
/// row are discarded.
pub fn prepare_batch<R: Rng + ?Sized>(
    pairs: &[(u32, u32)],
    sampler: &NegativeSampler,
    negatives: usize,
    rng: &mut R,
) -> PreparedBatch {
    let pairs = pairs
        .iter()
        .map(|&(center, context)| PreparedPair {
            center,
            context,
            negatives: (0..negatives).map(|_| sampler.sample(rng)).filter(|&n| n != context).collect(),
        })
        .collect();
    PreparedBatch { pairs }
}

/// Per-row gradients of the summed batch objective.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseGradient {
    pub input: BTreeMap<u32, Vec<f64>>,
    pub output: BTreeMap<u32, Vec<f64>>,
}

impl SparseGradient {
    pub fn is_finite(&self) -> bool {
        self.input.values().chain(self.output.values()).all(|g| g.iter().all(|v| v.is_finite()))
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// `-ln(sigmoid(x))`, stable for large |x|.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_rows(state: &EmbeddingModelState, batch: &PreparedBatch) -> Result<()> {
    let n = state.rows() as u32;
    for pair in &batch.pairs {
        let out_of_range = pair.center >= n || pair.context >= n || pair.negatives.iter().any(|&r| r >= n);
        if out_of_range {
            return Err(Error::invalid(format!(
                "pair ({}, {}) references a row outside 0..{n}",
                pair.center, pair.context
            )));
        }
    }
    Ok(())
}

/// Summed negative-sampling loss over the batch:
/// `sum -ln s(u_c . v_o) - sum_n ln s(-u_c . v_n)`.
pub fn batch_objective(state: &EmbeddingModelState, batch: &PreparedBatch) -> Result<f64> {
    check_rows(state, batch)?;
    let mut total = 0.0;
    for pair in &batch.pairs {
        let center = state.input.row(pair.center as usize);
        total += neg_log_sigmoid(dot(center, state.output.row(pair.context as usize)));
        for &neg in &pair.negatives {
            total += neg_log_sigmoid(-dot(center, state.output.row(neg as usize)));
        }
    }
    Ok(total)
}

/// Mean loss per pair; 0 for an empty batch.
pub fn batch_loss(state: &EmbeddingModelState, batch: &PreparedBatch) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    Ok(batch_objective(state, batch)? / batch.len() as f64)
}

/// Objective value and its analytic gradient over the touched rows.
pub fn objective_and_gradient(state: &EmbeddingModelState, batch: &PreparedBatch) -> Result<(f64, SparseGradient)> {
    check_rows(state, batch)?;
    let dim = state.dimension();
    let mut grad = SparseGradient::default();
    let mut total = 0.0;
    for pair in &batch.pairs {
        let center = state.input.row(pair.center as usize);
        let mut center_grad = vec![0.0; dim];
        let targets = std::iter::once((pair.context, true)).chain(pair.negatives.iter().map(|&n| (n, false)));
        for (row, positive) in targets {
            let out = state.output.row(row as usize);
            let score = dot(center, out);
            // d/ds of -ln s(s) is s(s) - 1; of -ln s(-s) is s(s)
            let coeff = if positive {
                total += neg_log_sigmoid(score);
                sigmoid(score) - 1.0
            } else {
                total += neg_log_sigmoid(-score);
                sigmoid(score)
            };
            let out_grad = grad.output.entry(row).or_insert_with(|| vec![0.0; dim]);
            for k in 0..dim {
                center_grad[k] += coeff * f64::from(out[k]);
                out_grad[k] += coeff * f64::from(center[k]);
            }
        }
        let slot = grad.input.entry(pair.center).or_insert_with(|| vec![0.0; dim]);
        for (s, g) in slot.iter_mut().zip(&center_grad) {
            *s += g;
        }
    }
    Ok((total, grad))
}

/// `W <- W - lr * grad`, rounded to `f32` once per entry.
pub fn apply_gradient(state: &mut EmbeddingModelState, grad: &SparseGradient, learning_rate: f64) {
    for (&row, g) in &grad.input {
        for (w, d) in state.input.row_mut(row as usize).iter_mut().zip(g) {
            *w = (f64::from(*w) - learning_rate * d) as f32;
        }
    }
    for (&row, g) in &grad.output {
        for (w, d) in state.output.row_mut(row as usize).iter_mut().zip(g) {
            *w = (f64::from(*w) - learning_rate * d) as f32;
        }
    }
}

/// One SGD step on a minibatch of `(center, context)` pairs. Returns the mean
/// batch loss before the step.
pub fn minibatch_gradient_step<R: Rng + ?Sized>(
    state: &mut EmbeddingModelState,
    batch: &[(u32, u32)],
    cfg: &SkipGramConfig,
    sampler: &NegativeSampler,
    rng: &mut R,
) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let prepared = prepare_batch(batch, sampler, cfg.negatives, rng);
    let (objective, grad) = objective_and_gradient(state, &prepared)?;
    if !grad.is_finite() || !objective.is_finite() {
        let bad_row = grad.input.iter().find(|(_, g)| g.iter().any(|v| !v.is_finite())).map(|(r, _)| *r);
        return Err(Error::NonFinite(format!(
            "skip-gram gradient (objective {objective}, first bad input row {bad_row:?})"
        )));
    }
    apply_gradient(state, &grad, cfg.learning_rate);
    Ok(objective / prepared.len() as f64)
}
