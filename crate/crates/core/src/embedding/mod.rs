//! The trainable embedding model: random-walk corpora, skip-gram with
//! negative sampling over the shared weight tables, and attribute feature
//! vectors that are projected and concatenated onto the learned embedding.

mod features;
mod projection;
mod skipgram;
mod trainer;
mod walks;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use features::{build_feature_vector, FeatureLayout, FeatureVector};
pub use projection::{compose_embedding, compose_tables, reduce_dimensions, RandomProjection};
pub use skipgram::{
    apply_gradient, batch_loss, batch_objective, minibatch_gradient_step, objective_and_gradient, prepare_batch,
    NegativeSampler, PreparedBatch, PreparedPair, SparseGradient,
};
pub use trainer::{EmbeddingModel, LocalTrainer, RoundStats};
pub use walks::{generate_walks, generate_walks_on_rows, training_pairs, WalkCorpus};

/// Dense row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Table {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, actual: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(cols: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, actual: row.len() });
            }
            data.extend(row.iter().map(|&v| v as f32));
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Rows widened to `f64`, for the analysis routines.
    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Input and output embedding tables. The input table (the hidden layer) is
/// the node representation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModelState {
    pub input: Table,
    pub output: Table,
}

impl EmbeddingModelState {
    /// Both tables drawn uniformly from `[-0.5/M, 0.5/M]`.
    pub fn initialize(rows: usize, dimension: usize, run_seed: u64) -> Self {
        let bound = 0.5 / dimension as f64;
        let mut rng = seed::derive_rng(run_seed, &[b"initial-weights"]);
        let mut draw = |n: usize| -> Vec<f32> { (0..n).map(|_| rng.random_range(-bound..bound) as f32).collect() };
        let input = draw(rows * dimension);
        let output = draw(rows * dimension);
        Self {
            input: Table { rows, cols: dimension, data: input },
            output: Table { rows, cols: dimension, data: output },
        }
    }

    pub fn rows(&self) -> usize {
        self.input.rows
    }

    pub fn dimension(&self) -> usize {
        self.input.cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self { walks_per_node: 80, walk_length: 40, seed: 0 }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_node < 1 {
            return Err(Error::Config("walks_per_node must be at least 1".into()));
        }
        if self.walk_length < 2 {
            return Err(Error::Config("walk_length must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipGramConfig {
    /// Embedding dimension M.
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    /// Training pairs per minibatch.
    pub batch_size: usize,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self { dimension: 128, window: 10, negatives: 5, learning_rate: 0.025, batch_size: 64 }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::Config("dimension must be at least 2".into()));
        }
        if self.window < 1 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_weights_are_bounded_and_seeded() {
        let a = EmbeddingModelState::initialize(10, 4, 3);
        let b = EmbeddingModelState::initialize(10, 4, 3);
        assert_eq!(a, b);
        assert!(a.input.as_slice().iter().chain(a.output.as_slice()).all(|v| v.abs() <= 0.125));
        assert_ne!(a, EmbeddingModelState::initialize(10, 4, 4));
    }

    #[test]
    fn config_validation() {
        assert!(WalkConfig { walk_length: 1, ..Default::default() }.validate().is_err());
        assert!(SkipGramConfig { dimension: 1, ..Default::default() }.validate().is_err());
        assert!(SkipGramConfig::default().validate().is_ok());
    }
}
