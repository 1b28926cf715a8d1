use rand_distr::{Distribution, StandardNormal};

use super::Table;
use crate::error::{Error, Result};
use crate::seed;

/// Seeded Gaussian random projection. Every client building it from the same
/// server-distributed seed gets the same matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomProjection {
    input_dim: usize,
    target_dim: usize,
    // target_dim x input_dim, row-major; None means identity with zero padding
    matrix: Option<Vec<f64>>,
}

impl RandomProjection {
    pub fn new(input_dim: usize, target_dim: usize, seed: u64) -> Self {
        if target_dim > input_dim {
            return Self { input_dim, target_dim, matrix: None };
        }
        let mut rng = seed::derive_rng(seed, &[b"projection"]);
        let scale = 1.0 / (target_dim as f64).sqrt();
        let matrix = (0..target_dim * input_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Self { input_dim, target_dim, matrix: Some(matrix) }
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn project(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, actual: features.len() });
        }
        Ok(match &self.matrix {
            None => {
                let mut out = features.to_vec();
                out.resize(self.target_dim, 0.0);
                out
            }
            Some(m) => m
                .chunks_exact(self.input_dim.max(1))
                .take(self.target_dim)
                .map(|row| row.iter().zip(features).map(|(a, b)| a * b).sum())
                .collect(),
        })
    }
}

/// Project every feature vector to `target_dim` dimensions.
pub fn reduce_dimensions(features: &[Vec<f64>], target_dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let Some(first) = features.first() else {
        return Ok(Vec::new());
    };
    let projection = RandomProjection::new(first.len(), target_dim, seed);
    features.iter().map(|f| projection.project(f)).collect()
}

/// Basic embedding followed by the reduced feature vector.
pub fn compose_embedding(basic: &[f32], reduced: &[f32]) -> Result<Vec<f32>> {
    if basic.len() != reduced.len() {
        return Err(Error::DimensionMismatch { expected: basic.len(), actual: reduced.len() });
    }
    Ok(basic.iter().chain(reduced).copied().collect())
}

pub fn compose_tables(basic: &Table, reduced: &Table) -> Result<Table> {
    if basic.rows() != reduced.rows() {
        return Err(Error::DimensionMismatch { expected: basic.rows(), actual: reduced.rows() });
    }
    let mut data = Vec::with_capacity(basic.rows() * basic.cols() * 2);
    for (b, r) in basic.iter_rows().zip(reduced.iter_rows()) {
        data.extend(compose_embedding(b, r)?);
    }
    Table::from_vec(basic.rows(), basic.cols() * 2, data)
}
