use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{
    generate_walks, generate_walks_on_rows, minibatch_gradient_step, training_pairs, EmbeddingModelState,
    NegativeSampler, SkipGramConfig, WalkConfig, WalkCorpus,
};
use crate::error::Result;
use crate::federation::GlobalIndex;
use crate::graph::LocalGraph;
use crate::seed;

/// Outcome of one local round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundStats {
    /// Training pairs consumed this round.
    pub samples: usize,
    pub batches: usize,
    /// Sample-weighted mean of the batch losses.
    pub loss: f64,
}

/// A locally trainable model over the shared weight tables.
pub trait EmbeddingModel: Send {
    fn train_round(&mut self, state: &mut EmbeddingModelState) -> Result<RoundStats>;

    /// Number of local training samples.
    fn sample_count(&self) -> usize;
}

/// DeepWalk trainer: a walk corpus generated once, turned into shuffled
/// skip-gram pairs, consumed in minibatches round-robin across rounds.
#[derive(Debug, Clone)]
pub struct LocalTrainer {
    cfg: SkipGramConfig,
    pairs: Vec<(u32, u32)>,
    sampler: Option<NegativeSampler>,
    batches_per_round: Option<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl LocalTrainer {
    pub fn new(
        graph: &LocalGraph,
        index: &GlobalIndex,
        walk: &WalkConfig,
        cfg: SkipGramConfig,
        seed: u64,
        batches_per_round: Option<usize>,
    ) -> Result<Self> {
        let corpus = generate_walks(graph, index, walk)?;
        Self::from_corpus(&corpus, cfg, seed, batches_per_round)
    }

    /// Trainer for a client that knows only the global rows of its own nodes.
    pub fn on_rows(
        graph: &LocalGraph,
        rows: &[u32],
        walk: &WalkConfig,
        cfg: SkipGramConfig,
        seed: u64,
        batches_per_round: Option<usize>,
    ) -> Result<Self> {
        let corpus = generate_walks_on_rows(graph, rows, walk)?;
        Self::from_corpus(&corpus, cfg, seed, batches_per_round)
    }

    pub fn from_corpus(
        corpus: &WalkCorpus,
        cfg: SkipGramConfig,
        seed: u64,
        batches_per_round: Option<usize>,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut pairs = training_pairs(corpus, cfg.window);
        pairs.shuffle(&mut seed::derive_rng(seed, &[b"pair-order"]));
        let sampler = if corpus.walks.is_empty() { None } else { Some(NegativeSampler::from_corpus(corpus)?) };
        Ok(Self { cfg, pairs, sampler, batches_per_round, cursor: 0, rng: seed::derive_rng(seed, &[b"negatives"]) })
    }

    pub fn config(&self) -> &SkipGramConfig {
        &self.cfg
    }

    fn next_batch(&mut self) -> Vec<(u32, u32)> {
        let size = self.cfg.batch_size.min(self.pairs.len());
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            let take = (size - batch.len()).min(self.pairs.len() - self.cursor);
            batch.extend_from_slice(&self.pairs[self.cursor..self.cursor + take]);
            self.cursor = (self.cursor + take) % self.pairs.len();
        }
        batch
    }
}

impl EmbeddingModel for LocalTrainer {
    /// Without `batches_per_round`, one round is one pass over the local
    /// pairs; otherwise that many minibatches continuing from the cursor.
    fn train_round(&mut self, state: &mut EmbeddingModelState) -> Result<RoundStats> {
        let Some(sampler) = self.sampler.clone() else {
            return Ok(RoundStats { samples: 0, batches: 0, loss: 0.0 });
        };
        if self.pairs.is_empty() {
            return Ok(RoundStats { samples: 0, batches: 0, loss: 0.0 });
        }
        let batches = self.batches_per_round.unwrap_or_else(|| self.pairs.len().div_ceil(self.cfg.batch_size));
        if self.batches_per_round.is_none() {
            self.cursor = 0;
        }
        let mut samples = 0;
        let mut weighted_loss = 0.0;
        for b in 0..batches {
            let batch = if self.batches_per_round.is_none() {
                let start = b * self.cfg.batch_size;
                let end = (start + self.cfg.batch_size).min(self.pairs.len());
                self.pairs[start..end].to_vec()
            } else {
                self.next_batch()
            };
            let loss = minibatch_gradient_step(state, &batch, &self.cfg, &sampler, &mut self.rng)?;
            samples += batch.len();
            weighted_loss += loss * batch.len() as f64;
        }
        Ok(RoundStats { samples, batches, loss: if samples == 0 { 0.0 } else { weighted_loss / samples as f64 } })
    }

    fn sample_count(&self) -> usize {
        self.pairs.len()
    }
}
