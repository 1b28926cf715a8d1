use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AttrValue, AttributeKind, AttributeSchema, LocalGraph};
use crate::error::{Error, Result};

/// Maximum vocabulary size kept per text attribute after merging.
pub const TEXT_VOCABULARY_SIZE: usize = 256;

/// Summary of one attribute over one party's non-missing values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeStats {
    Numeric {
        min: f64,
        max: f64,
    },
    Categorical {
        values: BTreeSet<String>,
    },
    /// Token document frequencies.
    Text {
        doc_freq: BTreeMap<String, u64>,
    },
    /// Every value of the attribute was missing.
    Empty {
        of: AttributeKind,
    },
}

impl AttributeStats {
    pub fn is_empty(&self) -> bool {
        matches!(self, AttributeStats::Empty { .. })
    }

    fn kind(&self) -> AttributeKind {
        match self {
            AttributeStats::Numeric { .. } => AttributeKind::Numeric,
            AttributeStats::Categorical { .. } => AttributeKind::Categorical,
            AttributeStats::Text { .. } => AttributeKind::Text,
            AttributeStats::Empty { of } => *of,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalAttributeStats {
    pub entries: Vec<(String, AttributeStats)>,
}

/// Exact per-attribute statistics over non-missing values.
pub fn local_attribute_stats(g: &LocalGraph, schema: &AttributeSchema) -> Result<LocalAttributeStats> {
    if g.schema() != schema {
        return Err(Error::Schema("graph does not conform to the given schema".into()));
    }
    let mut entries = Vec::with_capacity(schema.len());
    for (col, def) in schema.entries().iter().enumerate() {
        let values = (0..g.node_count()).map(|v| &g.attributes(v)[col]);
        let stats = match def.kind {
            AttributeKind::Numeric => {
                let mut range: Option<(f64, f64)> = None;
                for value in values {
                    if let AttrValue::Numeric(x) = value {
                        range = Some(match range {
                            None => (*x, *x),
                            Some((lo, hi)) => (lo.min(*x), hi.max(*x)),
                        });
                    }
                }
                range.map(|(min, max)| AttributeStats::Numeric { min, max })
            }
            AttributeKind::Categorical => {
                let set: BTreeSet<String> = values
                    .filter_map(|v| match v {
                        AttrValue::Category(c) => Some(c.clone()),
                        _ => None,
                    })
                    .collect();
                (!set.is_empty()).then_some(AttributeStats::Categorical { values: set })
            }
            AttributeKind::Text => {
                let mut doc_freq = BTreeMap::new();
                let mut any = false;
                for value in values {
                    if let AttrValue::Text(t) = value {
                        any = true;
                        for token in tokens(t) {
                            *doc_freq.entry(token).or_insert(0) += 1;
                        }
                    }
                }
                any.then_some(AttributeStats::Text { doc_freq })
            }
        };
        let stats = stats.unwrap_or(AttributeStats::Empty { of: def.kind });
        entries.push((def.name.clone(), stats));
    }
    Ok(LocalAttributeStats { entries })
}

/// Lower-cased alphanumeric tokens, deduplicated, in sorted order.
pub(crate) fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

/// Statistics merged over all parties: global numeric ranges, the union of
/// category sets, and the top text tokens by document frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStats {
    pub entries: Vec<(String, GlobalAttribute)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GlobalAttribute {
    Numeric { min: f64, max: f64 },
    Categorical { values: Vec<String> },
    Text { vocabulary: Vec<String> },
    Empty { of: AttributeKind },
}

impl GlobalStats {
    pub fn merge(schema: &AttributeSchema, parts: &[LocalAttributeStats]) -> Result<Self> {
        let mut entries = Vec::with_capacity(schema.len());
        for (col, def) in schema.entries().iter().enumerate() {
            let mut numeric: Option<(f64, f64)> = None;
            let mut categories = BTreeSet::new();
            let mut doc_freq: BTreeMap<String, u64> = BTreeMap::new();
            for part in parts {
                let (name, stats) =
                    part.entries.get(col).ok_or_else(|| Error::Schema("statistics do not cover the schema".into()))?;
                if name != &def.name || stats.kind() != def.kind {
                    return Err(Error::Schema(format!(
                        "statistics entry `{name}` does not match attribute `{}`",
                        def.name
                    )));
                }
                match stats {
                    AttributeStats::Numeric { min, max } => {
                        numeric = Some(match numeric {
                            None => (*min, *max),
                            Some((lo, hi)) => (lo.min(*min), hi.max(*max)),
                        });
                    }
                    AttributeStats::Categorical { values } => categories.extend(values.iter().cloned()),
                    AttributeStats::Text { doc_freq: df } => {
                        for (token, count) in df {
                            *doc_freq.entry(token.clone()).or_insert(0) += count;
                        }
                    }
                    AttributeStats::Empty { .. } => {}
                }
            }
            let merged = match def.kind {
                AttributeKind::Numeric => match numeric {
                    Some((min, max)) => GlobalAttribute::Numeric { min, max },
                    None => GlobalAttribute::Empty { of: def.kind },
                },
                AttributeKind::Categorical if categories.is_empty() => GlobalAttribute::Empty { of: def.kind },
                AttributeKind::Categorical => GlobalAttribute::Categorical { values: categories.into_iter().collect() },
                AttributeKind::Text if doc_freq.is_empty() => GlobalAttribute::Empty { of: def.kind },
                AttributeKind::Text => {
                    let mut ranked: Vec<(String, u64)> = doc_freq.into_iter().collect();
                    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                    ranked.truncate(TEXT_VOCABULARY_SIZE);
                    GlobalAttribute::Text { vocabulary: ranked.into_iter().map(|(t, _)| t).collect() }
                }
            };
            entries.push((def.name.clone(), merged));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, name: &str) -> Option<&GlobalAttribute> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AttributeDef, NodeId};

    fn graph(values: Vec<Vec<AttrValue>>) -> LocalGraph {
        let schema = AttributeSchema::new(vec![
            AttributeDef { name: "n".into(), kind: AttributeKind::Numeric },
            AttributeDef { name: "c".into(), kind: AttributeKind::Categorical },
        ])
        .unwrap();
        let nodes = values.into_iter().enumerate().map(|(i, v)| (NodeId::new(format!("n{i}")).unwrap(), v)).collect();
        LocalGraph::from_parts(schema, nodes, Vec::<(String, String)>::new()).unwrap().0
    }

    #[test]
    fn numeric_range_and_category_set() {
        let cat = |s: &str| AttrValue::Category(s.into());
        let g = graph(vec![
            vec![AttrValue::Numeric(3.0), cat("red")],
            vec![AttrValue::Numeric(7.0), cat("red")],
            vec![AttrValue::Numeric(5.0), cat("blue")],
        ]);
        let stats = local_attribute_stats(&g, g.schema()).unwrap();
        assert_eq!(stats.entries[0].1, AttributeStats::Numeric { min: 3.0, max: 7.0 });
        assert_eq!(
            stats.entries[1].1,
            AttributeStats::Categorical { values: ["blue".to_string(), "red".to_string()].into() }
        );
    }

    #[test]
    fn all_missing_is_flagged() {
        let g = graph(vec![vec![AttrValue::Missing, AttrValue::Missing]]);
        let stats = local_attribute_stats(&g, g.schema()).unwrap();
        assert!(stats.entries.iter().all(|(_, s)| s.is_empty()));
    }

    #[test]
    fn merge_takes_global_extremes() {
        let a = graph(vec![
            vec![AttrValue::Numeric(0.0), AttrValue::Missing],
            vec![AttrValue::Numeric(7.0), AttrValue::Missing],
        ]);
        let b = graph(vec![
            vec![AttrValue::Numeric(3.0), AttrValue::Category("x".into())],
            vec![AttrValue::Numeric(10.0), AttrValue::Missing],
        ]);
        let parts = [local_attribute_stats(&a, a.schema()).unwrap(), local_attribute_stats(&b, b.schema()).unwrap()];
        let merged = GlobalStats::merge(a.schema(), &parts).unwrap();
        assert_eq!(merged.get("n"), Some(&GlobalAttribute::Numeric { min: 0.0, max: 10.0 }));
        assert_eq!(merged.get("c"), Some(&GlobalAttribute::Categorical { values: vec!["x".into()] }));
    }

    #[test]
    fn tokens_are_normalised() {
        let t = tokens("Graph, graph; FEDERATED learning!");
        assert_eq!(t.into_iter().collect::<Vec<_>>(), ["federated", "graph", "learning"]);
    }
}
