//! Projection, clustering, anomaly scoring and evaluation metrics over
//! embedding rows.

mod anomaly;
mod cluster;
mod evaluate;
mod projection;

pub use anomaly::{isolation_forest, AnomalyResult, IsolationForestParams};
pub use cluster::{cluster, dbscan, kmeans, ClusterMethod, Clustering, KMEANS_MAX_RESTARTS, NOISE};
pub use evaluate::{
    auc_from_scores, eval_classification, eval_link_auc, eval_precision_at_l, EvaluationConfig, EvaluationReport,
    ProbeConfig, ProbeResult, DEFAULT_AUC_PAIRS,
};
pub use projection::{mds, project, tsne_embed, ProjectionMethod, ProjectionResult, TsneParams};

use crate::error::{Error, Result};

/// Rows must share one dimension and be finite.
fn check_rows(x: &[Vec<f64>]) -> Result<()> {
    let Some(first) = x.first() else { return Ok(()) };
    for r in x {
        if r.len() != first.len() {
            return Err(Error::DimensionMismatch { expected: first.len(), actual: r.len() });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input row".into()));
        }
    }
    if first.is_empty() {
        return Err(Error::invalid("rows must have at least one column"));
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
