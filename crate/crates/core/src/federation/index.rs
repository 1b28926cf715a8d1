use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;

/// Server-assigned mapping from public node id to a row of the shared weight
/// matrix. The same id registered by several clients maps to one row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<NodeId>", into = "Vec<NodeId>")]
pub struct GlobalIndex {
    ids: Vec<NodeId>,
    rows: HashMap<NodeId, u32>,
}

impl GlobalIndex {
    /// Union of the clients' node sets; rows are assigned in order of first
    /// appearance, iterating clients in the given order.
    pub fn unify<'a, I, J>(client_node_sets: I) -> Result<Self>
    where
        I: IntoIterator<Item = J>,
        J: IntoIterator<Item = &'a NodeId>,
    {
        let mut ids = Vec::new();
        let mut rows = HashMap::new();
        for set in client_node_sets {
            for id in set {
                if !rows.contains_key(id) {
                    let row = u32::try_from(ids.len()).map_err(|_| Error::invalid("more than u32::MAX nodes"))?;
                    rows.insert(id.clone(), row);
                    ids.push(id.clone());
                }
            }
        }
        Ok(Self { ids, rows })
    }

    /// Total distinct nodes (N).
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, id: &str) -> Option<u32> {
        self.rows.get(id).copied()
    }

    pub fn id(&self, row: u32) -> Option<&NodeId> {
        self.ids.get(row as usize)
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    /// Rows for the given ids, in order. Fails on an unknown id.
    pub fn rows_for<'a>(&self, ids: impl IntoIterator<Item = &'a NodeId>) -> Result<Vec<u32>> {
        ids.into_iter()
            .map(|id| {
                self.row(id.as_str()).ok_or_else(|| Error::NotFound(format!("node `{id}` is not in the global index")))
            })
            .collect()
    }
}

impl From<Vec<NodeId>> for GlobalIndex {
    fn from(ids: Vec<NodeId>) -> Self {
        let rows = ids.iter().enumerate().map(|(i, id)| (id.clone(), i as u32)).collect();
        Self { ids, rows }
    }
}

impl From<GlobalIndex> for Vec<NodeId> {
    fn from(index: GlobalIndex) -> Self {
        index.ids
    }
}
