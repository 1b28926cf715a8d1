use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{topology_metric, AttrValue, AttributeKind, AttributeSchema, LocalGraph, TopologyMetricKind};

/// What a histogram or a predicate refers to: a schema attribute or a locally
/// computed topology metric.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum Target {
    Attribute(String),
    Metric(TopologyMetricKind),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Attribute(name) => f.write_str(name),
            Target::Metric(kind) => write!(f, "{kind}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Condition {
    /// `min <= x < max`, or `min <= x <= max` with `inclusive_max`.
    Range {
        min: f64,
        max: f64,
        #[serde(default)]
        inclusive_max: bool,
    },
    OneOf {
        values: Vec<String>,
    },
}

impl Condition {
    /// The predicate selecting bin `i` of a numeric histogram with `edges`.
    pub fn bin(edges: &[f64], i: usize) -> Result<Self> {
        if i + 1 >= edges.len() {
            return Err(Error::invalid(format!("bin {i} out of range for {} edges", edges.len())));
        }
        Ok(Condition::Range { min: edges[i], max: edges[i + 1], inclusive_max: i + 2 == edges.len() })
    }

    fn matches_number(&self, x: f64) -> bool {
        match self {
            Condition::Range { min, max, inclusive_max } => x >= *min && (x < *max || (*inclusive_max && x <= *max)),
            Condition::OneOf { .. } => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub target: Target,
    #[serde(flatten)]
    pub condition: Condition,
}

/// Conjunction of predicates. The empty filter passes every node.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FilterCondition {
    pub predicates: Vec<Predicate>,
}

impl FilterCondition {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn and(mut self, target: Target, condition: Condition) -> Self {
        self.predicates.push(Predicate { target, condition });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    /// Reject predicates on unknown or text attributes, and conditions that
    /// do not fit the attribute kind.
    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        for p in &self.predicates {
            match (&p.target, &p.condition) {
                (Target::Metric(_), Condition::Range { min, max, .. }) => check_range(*min, *max)?,
                (Target::Metric(kind), Condition::OneOf { .. }) => {
                    return Err(Error::invalid(format!("metric `{kind}` needs a range predicate")))
                }
                (Target::Attribute(name), cond) => {
                    let (_, def) = schema
                        .get(name)
                        .ok_or_else(|| Error::Schema(format!("filter references unknown attribute `{name}`")))?;
                    match (def.kind, cond) {
                        (AttributeKind::Numeric, Condition::Range { min, max, .. }) => check_range(*min, *max)?,
                        (AttributeKind::Categorical, Condition::OneOf { .. }) => {}
                        (kind, _) => {
                            return Err(Error::invalid(format!(
                                "predicate on `{name}` does not fit a {kind:?} attribute"
                            )))
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn metrics(&self) -> impl Iterator<Item = TopologyMetricKind> + '_ {
        self.predicates.iter().filter_map(|p| match p.target {
            Target::Metric(k) => Some(k),
            Target::Attribute(_) => None,
        })
    }
}

fn check_range(min: f64, max: f64) -> Result<()> {
    if min.is_nan() || max.is_nan() || min > max {
        return Err(Error::invalid(format!("bad range [{min}, {max}]")));
    }
    Ok(())
}

/// A local graph with topology metrics computed on demand, for filtering and
/// binning. Metrics never leave the party; only their distributions do.
pub struct LocalView<'a> {
    graph: &'a LocalGraph,
    metrics: BTreeMap<TopologyMetricKind, Vec<f64>>,
}

impl<'a> LocalView<'a> {
    pub fn new(graph: &'a LocalGraph) -> Self {
        Self { graph, metrics: BTreeMap::new() }
    }

    pub fn graph(&self) -> &'a LocalGraph {
        self.graph
    }

    pub fn metric(&mut self, kind: TopologyMetricKind) -> &[f64] {
        let graph = self.graph;
        self.metrics.entry(kind).or_insert_with(|| topology_metric(graph, kind))
    }

    /// Value of `target` for `node`; `None` when missing.
    pub fn value(&mut self, target: &Target, node: usize) -> Result<Option<Value<'a>>> {
        Ok(match target {
            Target::Metric(kind) => Some(Value::Number(self.metric(*kind)[node])),
            Target::Attribute(name) => {
                let col = self
                    .graph
                    .schema()
                    .position(name)
                    .ok_or_else(|| Error::Schema(format!("unknown attribute `{name}`")))?;
                match &self.graph.attributes(node)[col] {
                    AttrValue::Missing => None,
                    AttrValue::Numeric(x) => Some(Value::Number(*x)),
                    AttrValue::Category(c) => Some(Value::Label(c)),
                    AttrValue::Text(t) => Some(Value::Label(t)),
                }
            }
        })
    }

    /// Local node indices passing `filter`.
    pub fn select(&mut self, filter: &FilterCondition) -> Result<Vec<usize>> {
        filter.validate(self.graph.schema())?;
        let mut keep = Vec::new();
        'nodes: for node in 0..self.graph.node_count() {
            for p in &filter.predicates {
                let pass = match self.value(&p.target, node)? {
                    None => false,
                    Some(Value::Number(x)) => p.condition.matches_number(x),
                    Some(Value::Label(l)) => match &p.condition {
                        Condition::OneOf { values } => values.iter().any(|v| v == l),
                        Condition::Range { .. } => false,
                    },
                };
                if !pass {
                    continue 'nodes;
                }
            }
            keep.push(node);
        }
        Ok(keep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<'a> {
    Number(f64),
    Label(&'a str),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AttributeDef, NodeId};

    fn players() -> LocalGraph {
        let schema = AttributeSchema::new(vec![
            AttributeDef { name: "age".into(), kind: AttributeKind::Numeric },
            AttributeDef { name: "team".into(), kind: AttributeKind::Categorical },
        ])
        .unwrap();
        let nodes = vec![
            (NodeId::new("a").unwrap(), vec![AttrValue::Numeric(9.0), AttrValue::Category("x".into())]),
            (NodeId::new("b").unwrap(), vec![AttrValue::Numeric(10.0), AttrValue::Category("y".into())]),
            (NodeId::new("c").unwrap(), vec![AttrValue::Numeric(30.0), AttrValue::Category("x".into())]),
            (NodeId::new("d").unwrap(), vec![AttrValue::Missing, AttrValue::Category("x".into())]),
        ];
        LocalGraph::from_parts(schema, nodes, vec![("a", "b"), ("b", "c")]).unwrap().0
    }

    #[test]
    fn inclusive_age_range() {
        let g = players();
        let f = FilterCondition::all()
            .and(Target::Attribute("age".into()), Condition::Range { min: 10.0, max: 30.0, inclusive_max: true });
        assert_eq!(LocalView::new(&g).select(&f).unwrap(), vec![1, 2]);
    }

    #[test]
    fn conjunction_with_membership_and_metric() {
        let g = players();
        let f = FilterCondition::all()
            .and(Target::Attribute("team".into()), Condition::OneOf { values: vec!["x".into()] })
            .and(
                Target::Metric(TopologyMetricKind::Degree),
                Condition::Range { min: 1.0, max: 1.0, inclusive_max: true },
            );
        assert_eq!(LocalView::new(&g).select(&f).unwrap(), vec![0, 2]);
    }

    #[test]
    fn empty_filter_passes_everything() {
        let g = players();
        assert_eq!(LocalView::new(&g).select(&FilterCondition::all()).unwrap().len(), 4);
    }

    #[test]
    fn unknown_or_mismatched_predicates_rejected() {
        let g = players();
        let unknown =
            FilterCondition::all().and(Target::Attribute("height".into()), Condition::OneOf { values: vec![] });
        assert!(matches!(unknown.validate(g.schema()), Err(Error::Schema(_))));
        let wrong = FilterCondition::all()
            .and(Target::Attribute("team".into()), Condition::Range { min: 0.0, max: 1.0, inclusive_max: false });
        assert!(wrong.validate(g.schema()).is_err());
    }

    #[test]
    fn bin_predicates_partition_the_range() {
        let edges = [0.0, 5.0, 10.0];
        let c0 = Condition::bin(&edges, 0).unwrap();
        let c1 = Condition::bin(&edges, 1).unwrap();
        assert!(c0.matches_number(0.0) && !c0.matches_number(5.0));
        assert!(c1.matches_number(5.0) && c1.matches_number(10.0));
        assert!(Condition::bin(&edges, 2).is_err());
    }

    #[test]
    fn filter_round_trips_through_json() {
        let f = FilterCondition::all().and(
            Target::Metric(TopologyMetricKind::PageRank),
            Condition::Range { min: 0.0, max: 1.0, inclusive_max: false },
        );
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(serde_json::from_str::<FilterCondition>(&text).unwrap(), f);
    }
}
