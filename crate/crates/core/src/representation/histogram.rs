use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::filter::{FilterCondition, LocalView, Target, Value};
use crate::error::{Error, Result};
use crate::graph::{AttributeKind, AttributeSchema, GlobalAttribute, GlobalStats, TopologyMetricKind};
use crate::privacy::{BinCounts, Mechanism, SensitiveCode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramConfig {
    /// Bin count for numeric attributes and metrics without explicit edges.
    pub bins: usize,
    /// Explicit bin edges keyed by attribute or metric name.
    pub edges: BTreeMap<String, Vec<f64>>,
    /// Restrict attribute histograms to these names; all non-text attributes
    /// when absent.
    pub attributes: Option<Vec<String>>,
    pub metrics: Vec<TopologyMetricKind>,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self { bins: 10, edges: BTreeMap::new(), attributes: None, metrics: TopologyMetricKind::ALL.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bins {
    Numeric { edges: Vec<f64> },
    Categorical { labels: Vec<String> },
}

impl Bins {
    pub fn len(&self) -> usize {
        match self {
            Bins::Numeric { edges } => edges.len().saturating_sub(1),
            Bins::Categorical { labels } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A histogram every party computes with identical bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub target: Target,
    pub bins: Bins,
}

/// A released distribution: post-protection, post-aggregation counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeHistogram {
    pub target: Target,
    pub bins: Bins,
    pub counts: Vec<f64>,
    pub mechanism: Mechanism,
    pub filter: FilterCondition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRange {
    pub metric: TopologyMetricKind,
    pub min: f64,
    pub max: f64,
}

/// Local min/max of each metric. Metrics of an empty graph are omitted.
pub fn local_metric_ranges(view: &mut LocalView<'_>, kinds: &[TopologyMetricKind]) -> Vec<MetricRange> {
    kinds
        .iter()
        .filter_map(|&metric| {
            let values = view.metric(metric);
            let min = values.iter().copied().reduce(f64::min)?;
            let max = values.iter().copied().reduce(f64::max)?;
            Some(MetricRange { metric, min, max })
        })
        .collect()
}

pub fn merge_metric_ranges<'a>(parts: impl IntoIterator<Item = &'a [MetricRange]>) -> Vec<MetricRange> {
    let mut merged: BTreeMap<TopologyMetricKind, (f64, f64)> = BTreeMap::new();
    for part in parts {
        for r in part {
            let e = merged.entry(r.metric).or_insert((r.min, r.max));
            e.0 = e.0.min(r.min);
            e.1 = e.1.max(r.max);
        }
    }
    merged.into_iter().map(|(metric, (min, max))| MetricRange { metric, min, max }).collect()
}

/// `bins` equal-width edges spanning `[min, max]`. A degenerate range is
/// widened by one half on each side so the edges stay strictly increasing.
pub fn uniform_edges(min: f64, max: f64, bins: usize) -> Vec<f64> {
    let (lo, hi) = if max > min { (min, max) } else { (min - 0.5, min + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    edges
}

fn check_edges(name: &str, edges: &[f64]) -> Result<()> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config(format!("bin edges for `{name}` must be at least two strictly increasing values")));
    }
    Ok(())
}

/// Bin index of `x`: bins are left-closed, the last one right-closed, and
/// values outside the edges fall into the first or last bin.
pub fn bin_of(edges: &[f64], x: f64) -> usize {
    let bins = edges.len() - 1;
    // first edge strictly greater than x
    let upper = edges.partition_point(|&e| e <= x);
    upper.saturating_sub(1).min(bins - 1)
}

/// Decide the bins every party will use, from merged statistics only.
pub fn plan_histograms(
    schema: &AttributeSchema,
    stats: &GlobalStats,
    metric_ranges: &[MetricRange],
    cfg: &HistogramConfig,
) -> Result<Vec<HistogramSpec>> {
    if cfg.bins == 0 {
        return Err(Error::Config("histogram bin count must be positive".into()));
    }
    for (name, edges) in &cfg.edges {
        check_edges(name, edges)?;
    }
    if let Some(names) = &cfg.attributes {
        for name in names {
            if schema.position(name).is_none() {
                return Err(Error::Schema(format!("histogram references unknown attribute `{name}`")));
            }
        }
    }
    let mut specs = Vec::new();
    for def in schema.entries() {
        if let Some(names) = &cfg.attributes {
            if !names.contains(&def.name) {
                continue;
            }
        }
        let bins = match (def.kind, stats.get(&def.name)) {
            // too free-form to count
            (AttributeKind::Text, _) => continue,
            (AttributeKind::Numeric, merged) => {
                let edges = match (cfg.edges.get(&def.name), merged) {
                    (Some(edges), _) => edges.clone(),
                    (None, Some(GlobalAttribute::Numeric { min, max })) => uniform_edges(*min, *max, cfg.bins),
                    (None, _) => uniform_edges(0.0, 1.0, cfg.bins),
                };
                Bins::Numeric { edges }
            }
            (AttributeKind::Categorical, Some(GlobalAttribute::Categorical { values })) => {
                Bins::Categorical { labels: values.clone() }
            }
            (AttributeKind::Categorical, _) => continue,
        };
        specs.push(HistogramSpec { target: Target::Attribute(def.name.clone()), bins });
    }
    for &metric in &cfg.metrics {
        let edges = match cfg.edges.get(metric.as_str()) {
            Some(edges) => edges.clone(),
            None => match metric_ranges.iter().find(|r| r.metric == metric) {
                Some(r) => uniform_edges(r.min, r.max, cfg.bins),
                None => uniform_edges(0.0, 1.0, cfg.bins),
            },
        };
        specs.push(HistogramSpec { target: Target::Metric(metric), bins: Bins::Numeric { edges } });
    }
    Ok(specs)
}

/// Bin index of `node` under `spec`, or `None` when its value is missing.
pub fn node_bin(view: &mut LocalView<'_>, spec: &HistogramSpec, node: usize) -> Result<Option<usize>> {
    Ok(match (view.value(&spec.target, node)?, &spec.bins) {
        (None, _) => None,
        (Some(Value::Number(x)), Bins::Numeric { edges }) => Some(bin_of(edges, x)),
        (Some(Value::Label(l)), Bins::Categorical { labels }) => labels.iter().position(|v| v == l),
        (Some(_), _) => return Err(Error::Schema(format!("value of `{}` does not fit its bins", spec.target))),
    })
}

/// Counts over the nodes passing `filter`.
pub fn build_histogram(view: &mut LocalView<'_>, spec: &HistogramSpec, filter: &FilterCondition) -> Result<BinCounts> {
    let nodes = view.select(filter)?;
    count_nodes(view, spec, &nodes)
}

pub fn count_nodes(view: &mut LocalView<'_>, spec: &HistogramSpec, nodes: &[usize]) -> Result<BinCounts> {
    let mut counts = vec![0u64; spec.bins.len()];
    for &node in nodes {
        if let Some(b) = node_bin(view, spec, node)? {
            counts[b] += 1;
        }
    }
    Ok(BinCounts(counts))
}

/// `(bin, sensitive code)` records for l-diversity. Nodes with a missing
/// binned or sensitive value are left out.
pub fn sensitive_records(
    view: &mut LocalView<'_>,
    spec: &HistogramSpec,
    sensitive: &HistogramSpec,
    nodes: &[usize],
) -> Result<Vec<(usize, SensitiveCode)>> {
    let mut records = Vec::new();
    for &node in nodes {
        if let (Some(b), Some(s)) = (node_bin(view, spec, node)?, node_bin(view, sensitive, node)?) {
            records.push((b, SensitiveCode(s as u64)));
        }
    }
    Ok(records)
}
