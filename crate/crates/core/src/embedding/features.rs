use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{tokens, AttrValue, AttributeKind, AttributeSchema, GlobalAttribute, GlobalStats};

/// Fixed-length attribute feature vector of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Block {
    OneHot { column: usize, labels: Vec<String> },
    Vocabulary { column: usize, tokens: Vec<String> },
    Scaled { column: usize, min: f64, max: f64 },
}

/// Layout derived from the merged statistics: one-hot blocks for categorical
/// and text attributes first (schema order), then one min-max scaled slot per
/// numeric attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLayout {
    blocks: Vec<Block>,
    width: usize,
    columns: usize,
}

impl FeatureLayout {
    pub fn new(schema: &AttributeSchema, stats: &GlobalStats) -> Result<Self> {
        let mut one_hot = Vec::new();
        let mut numeric = Vec::new();
        for (column, def) in schema.entries().iter().enumerate() {
            let merged = stats
                .get(&def.name)
                .ok_or_else(|| Error::Schema(format!("no merged statistics for `{}`", def.name)))?;
            match (def.kind, merged) {
                (AttributeKind::Categorical, GlobalAttribute::Categorical { values }) => {
                    one_hot.push(Block::OneHot { column, labels: values.clone() })
                }
                (AttributeKind::Text, GlobalAttribute::Text { vocabulary }) => {
                    one_hot.push(Block::Vocabulary { column, tokens: vocabulary.clone() })
                }
                (AttributeKind::Numeric, GlobalAttribute::Numeric { min, max }) => {
                    numeric.push(Block::Scaled { column, min: *min, max: *max })
                }
                (AttributeKind::Numeric, GlobalAttribute::Empty { .. }) => {
                    numeric.push(Block::Scaled { column, min: 0.0, max: 0.0 })
                }
                (_, GlobalAttribute::Empty { .. }) => {}
                (kind, other) => {
                    return Err(Error::Schema(format!(
                        "attribute `{}` is {kind:?} but merged statistics are {other:?}",
                        def.name
                    )))
                }
            }
        }
        one_hot.extend(numeric);
        let width = one_hot
            .iter()
            .map(|b| match b {
                Block::OneHot { labels, .. } => labels.len(),
                Block::Vocabulary { tokens, .. } => tokens.len(),
                Block::Scaled { .. } => 1,
            })
            .sum();
        Ok(Self { blocks: one_hot, width, columns: schema.len() })
    }

    /// Feature length: category cardinalities + vocabulary sizes + numeric count.
    pub fn len(&self) -> usize {
        self.width
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0
    }

    pub fn feature_vector(&self, values: &[AttrValue]) -> Result<FeatureVector> {
        build_feature_vector(values, self)
    }
}

/// Features for one node's attribute tuple. Missing values give a zero block.
/// Values outside the merged range are clamped with a warning.
pub fn build_feature_vector(values: &[AttrValue], layout: &FeatureLayout) -> Result<FeatureVector> {
    if values.len() != layout.columns {
        return Err(Error::DimensionMismatch { expected: layout.columns, actual: values.len() });
    }
    let mut out = Vec::with_capacity(layout.width);
    for block in &layout.blocks {
        match block {
            Block::OneHot { column, labels } => {
                let start = out.len();
                out.resize(start + labels.len(), 0.0);
                if let AttrValue::Category(c) = &values[*column] {
                    match labels.binary_search(c) {
                        Ok(i) => out[start + i] = 1.0,
                        Err(_) => log::warn!("category `{c}` not in merged statistics; encoded as zero block"),
                    }
                }
            }
            Block::Vocabulary { column, tokens: vocab } => {
                let start = out.len();
                out.resize(start + vocab.len(), 0.0);
                if let AttrValue::Text(t) = &values[*column] {
                    let present = tokens(t);
                    for (i, token) in vocab.iter().enumerate() {
                        if present.contains(token) {
                            out[start + i] = 1.0;
                        }
                    }
                }
            }
            Block::Scaled { column, min, max } => {
                let scaled = match &values[*column] {
                    AttrValue::Numeric(v) if max > min => {
                        let x = (v - min) / (max - min);
                        if !(0.0..=1.0).contains(&x) {
                            log::warn!("value {v} outside merged range [{min}, {max}]; clamped");
                        }
                        x.clamp(0.0, 1.0)
                    }
                    _ => 0.0,
                };
                out.push(scaled);
            }
        }
    }
    Ok(FeatureVector { values: out })
}
