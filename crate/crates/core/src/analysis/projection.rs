use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::check_rows;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    #[default]
    Mds,
    Tsne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub method: ProjectionMethod,
    pub coordinates: Vec<[f64; 2]>,
    /// Effective perplexity, for t-SNE.
    pub perplexity: Option<f64>,
    pub seed: u64,
}

pub fn project(x: &[Vec<f64>], method: ProjectionMethod, tsne: &TsneParams, seed: u64) -> Result<ProjectionResult> {
    let (coordinates, perplexity) = match method {
        ProjectionMethod::Mds => (mds(x)?, None),
        ProjectionMethod::Tsne => {
            let (c, p) = tsne_embed(x, tsne, seed)?;
            (c, Some(p))
        }
    };
    Ok(ProjectionResult { method, coordinates, perplexity, seed })
}

fn squared_distances(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i][j] = s;
            d[j][i] = s;
        }
    }
    d
}

fn degenerate(x: &[Vec<f64>]) -> bool {
    x.iter().all(|r| r == &x[0])
}

/// Classical MDS: top two eigenpairs of the double-centred squared distance
/// matrix.
pub fn mds(x: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    check_rows(x)?;
    let n = x.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if degenerate(x) {
        log::warn!("all rows identical; projection is all zeros");
        return Ok(vec![[0.0; 2]; n]);
    }
    let d = squared_distances(x);
    let row_mean: Vec<f64> = d.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d[i][j] - row_mean[i] - row_mean[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = vec![[0.0; 2]; n];
    for (c, &k) in order.iter().take(2).enumerate() {
        let scale = eig.eigenvalues[k].max(0.0).sqrt();
        let v = eig.eigenvectors.column(k);
        // fix the sign so results do not depend on the solver
        let pivot = (0..n).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            out[i][c] = sign * v[i] * scale;
        }
    }
    Ok(out)
}

/// Row-conditional affinities at the target perplexity, by bisection on the
/// Gaussian precision.
fn affinities(d: &[Vec<f64>], perplexity: f64) -> Vec<Vec<f64>> {
    let n = d.len();
    let target = perplexity.ln();
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        let (mut lo, mut hi, mut beta) = (0.0f64, f64::INFINITY, 1.0f64);
        let min_d = (0..n).filter(|&j| j != i).map(|j| d[i][j]).fold(f64::INFINITY, f64::min);
        for _ in 0..200 {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                if j != i {
                    let w = (-(d[i][j] - min_d) * beta).exp();
                    p[i][j] = w;
                    sum += w;
                    weighted += w * (d[i][j] - min_d);
                }
            }
            let entropy = sum.ln() + beta * weighted / sum;
            for v in p[i].iter_mut() {
                *v /= sum;
            }
            let gap = entropy - target;
            if gap.abs() < 1e-5 {
                break;
            }
            if gap > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
    }
    p
}

/// Exact t-SNE with momentum and per-coordinate gains.
pub fn tsne_embed(x: &[Vec<f64>], params: &TsneParams, seed: u64) -> Result<(Vec<[f64; 2]>, f64)> {
    check_rows(x)?;
    let n = x.len();
    if params.perplexity <= 0.0 || params.learning_rate <= 0.0 {
        return Err(Error::invalid("perplexity and learning rate must be positive"));
    }
    if n < 3 || degenerate(x) {
        if n > 0 && degenerate(x) {
            log::warn!("all rows identical; projection is all zeros");
        }
        return Ok((vec![[0.0; 2]; n], params.perplexity));
    }
    let perplexity = params.perplexity.min((n - 1) as f64 / 3.0);
    let d = squared_distances(x);
    let cond = affinities(&d, perplexity);
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            p[i][j] = ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(1e-12);
        }
    }

    let mut rng = seed::derive_rng(seed, &[b"tsne"]);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut q = vec![vec![0.0; n]; n];
    for iter in 0..params.iterations {
        let exaggeration = if iter < params.exaggeration_iterations { params.early_exaggeration } else { 1.0 };
        let momentum = if iter < params.exaggeration_iterations { 0.5 } else { 0.8 };
        let mut z = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                q[i][j] = w;
                q[j][i] = w;
                z += 2.0 * w;
            }
        }
        for i in 0..n {
            let mut grad = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = q[i][j];
                let m = 4.0 * (exaggeration * p[i][j] - w / z) * w;
                grad[0] += m * (y[i][0] - y[j][0]);
                grad[1] += m * (y[i][1] - y[j][1]);
            }
            for c in 0..2 {
                gains[i][c] = if (grad[c] > 0.0) != (velocity[i][c] > 0.0) {
                    gains[i][c] + 0.2
                } else {
                    (gains[i][c] * 0.8).max(0.01)
                };
                velocity[i][c] = momentum * velocity[i][c] - params.learning_rate * gains[i][c] * grad[c];
            }
        }
        let mut mean = [0.0; 2];
        for i in 0..n {
            for c in 0..2 {
                y[i][c] += velocity[i][c];
                mean[c] += y[i][c] / n as f64;
            }
        }
        for yi in y.iter_mut() {
            yi[0] -= mean[0];
            yi[1] -= mean[1];
        }
    }
    if y.iter().any(|r| !r[0].is_finite() || !r[1].is_finite()) {
        return Err(Error::NonFinite("t-SNE coordinates".into()));
    }
    Ok((y, perplexity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    fn input_dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn equidistant_points_stay_equidistant() {
        let x = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let y = mds(&x).unwrap();
        let d = [dist(&y[0], &y[1]), dist(&y[1], &y[2]), dist(&y[0], &y[2])];
        assert!((d[0] - d[1]).abs() < 1e-6 && (d[1] - d[2]).abs() < 1e-6, "{d:?}");
        assert!((d[0] - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn identical_rows_project_to_zero() {
        let y = mds(&vec![vec![2.0, 2.0]; 4]).unwrap();
        assert!(y.iter().all(|p| p == &[0.0, 0.0]));
    }

    #[test]
    fn tsne_is_seeded() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
        let p = TsneParams { iterations: 50, ..Default::default() };
        assert_eq!(tsne_embed(&x, &p, 3).unwrap(), tsne_embed(&x, &p, 3).unwrap());
    }

    #[test]
    fn tsne_perplexity_is_clamped() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let p = TsneParams { iterations: 10, ..Default::default() };
        assert_eq!(tsne_embed(&x, &p, 0).unwrap().1, 3.0);
    }

    proptest! {
        #[test]
        fn planar_input_distances_are_recovered(
            pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..15),
            angle in 0.0f64..6.3, shift in -5.0f64..5.0,
        ) {
            // embed the plane rotated and shifted in 3D
            let x: Vec<Vec<f64>> = pts
                .iter()
                .map(|(a, b)| vec![a * angle.cos() - b * angle.sin() + shift, a * angle.sin() + b * angle.cos(), shift])
                .collect();
            let y = mds(&x).unwrap();
            for i in 0..x.len() {
                for j in 0..x.len() {
                    let want = input_dist(&x[i], &x[j]);
                    prop_assert!((dist(&y[i], &y[j]) - want).abs() < 1e-6 * (1.0 + want));
                }
            }
        }
    }
}
