use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttrValue, AttributeKind, AttributeSchema, LocalGraph, NodeId};
use crate::error::{Error, Result};

/// Summary of what ingestion kept and dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub nodes: usize,
    pub edges: usize,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

impl LoadReport {
    pub fn dropped(&self) -> usize {
        self.self_loops_dropped + self.duplicates_dropped
    }
}

/// Parse an edge list and a node attribute table into a [`LocalGraph`].
///
/// Edge lines hold two ids separated by whitespace or a comma; blank lines and
/// lines starting with `#` are skipped. The node table is CSV with a header
/// row: the first column is the node id, the rest must match the schema names
/// in order. Empty cells and `NA` are missing values.
pub fn load_graph(edge_source: &str, node_source: &str, schema: &AttributeSchema) -> Result<(LocalGraph, LoadReport)> {
    let nodes = parse_node_table(node_source, schema)?;
    let edges = parse_edge_list(edge_source)?;
    LocalGraph::from_parts(schema.clone(), nodes, edges)
}

pub fn load_graph_files(
    edge_path: &Path,
    node_path: &Path,
    schema: &AttributeSchema,
) -> Result<(LocalGraph, LoadReport)> {
    let edges = std::fs::read_to_string(edge_path)?;
    let nodes = std::fs::read_to_string(node_path)?;
    load_graph(&edges, &nodes, schema)
}

fn parse_edge_list(source: &str) -> Result<Vec<(String, String)>> {
    let mut edges = Vec::new();
    for (lineno, line) in source.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        if fields.len() != 2 {
            return Err(Error::Malformed {
                line: lineno + 1,
                reason: format!("expected two node ids, found {}", fields.len()),
            });
        }
        edges.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(edges)
}

fn parse_node_table(source: &str, schema: &AttributeSchema) -> Result<Vec<(NodeId, Vec<AttrValue>)>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source.as_bytes());
    let header = reader.headers()?.clone();
    if header.len() != schema.len() + 1 {
        return Err(Error::Schema(format!(
            "node table has {} attribute columns, schema has {}",
            header.len().saturating_sub(1),
            schema.len()
        )));
    }
    for (column, def) in header.iter().skip(1).zip(schema.entries()) {
        if column != def.name {
            return Err(Error::Schema(format!("column `{column}` does not match schema attribute `{}`", def.name)));
        }
    }

    let mut nodes = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        if record.len() != schema.len() + 1 {
            return Err(Error::Schema(format!("line {line}: {} fields, expected {}", record.len(), schema.len() + 1)));
        }
        let id = NodeId::new(&record[0]).map_err(|_| Error::Malformed { line, reason: "empty node id".into() })?;
        let mut values = Vec::with_capacity(schema.len());
        for (cell, def) in record.iter().skip(1).zip(schema.entries()) {
            values.push(parse_cell(cell, def.kind, line)?);
        }
        nodes.push((id, values));
    }
    Ok(nodes)
}

fn parse_cell(cell: &str, kind: AttributeKind, line: usize) -> Result<AttrValue> {
    if cell.is_empty() || cell == "NA" {
        return Ok(AttrValue::Missing);
    }
    Ok(match kind {
        AttributeKind::Numeric => {
            let value: f64 = cell.parse().map_err(|_| Error::ParseNumber { line, value: cell.to_string() })?;
            if !value.is_finite() {
                return Err(Error::ParseNumber { line, value: cell.to_string() });
            }
            AttrValue::Numeric(value)
        }
        AttributeKind::Categorical => AttrValue::Category(cell.to_string()),
        AttributeKind::Text => AttrValue::Text(cell.to_string()),
    })
}
