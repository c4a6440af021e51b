//! Deterministic graph persistence.
//!
//! One self-describing JSON record per line, UTF-8, keys sorted. A snapshot
//! holds a meta header, every entity, every edge, and the deprecation log;
//! an export holds entities and edges only. Records are ordered by kind and
//! then by id, so equal states serialize to equal bytes and the files can
//! be compared byte-for-byte in tests.

use super::{DeprecationRecord, EdgeStatus, EntityNode, FactEdge, GraphError, GraphState};
use crate::jsonl::canonical_line;
use serde::{Deserialize, Serialize};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Meta {
        batch_index: u64,
        version: u32,
    },
    Entity(EntityNode),
    Edge(FactEdge),
    Deprecation(DeprecationRecord),
}

fn push_line(out: &mut String, record: &Record) {
    out.push_str(&canonical_line(record));
    out.push('\n');
}

pub(super) fn snapshot(state: &GraphState) -> Vec<u8> {
    let mut out = String::new();
    push_line(
        &mut out,
        &Record::Meta { batch_index: state.batch_index, version: FORMAT_VERSION },
    );
    write_body(state, &mut out);
    for rec in &state.deprecation_log {
        push_line(&mut out, &Record::Deprecation(rec.clone()));
    }
    out.into_bytes()
}

pub(super) fn export(state: &GraphState) -> Vec<u8> {
    let mut out = String::new();
    write_body(state, &mut out);
    out.into_bytes()
}

fn write_body(state: &GraphState, out: &mut String) {
    // BTreeMap iteration yields id order.
    for node in state.entities.values() {
        push_line(out, &Record::Entity(node.clone()));
    }
    for edge in state.edges.values() {
        push_line(out, &Record::Edge(edge.clone()));
    }
}

/// Rebuild a graph state from snapshot bytes, validating structural
/// invariants along the way.
pub fn restore(bytes: &[u8]) -> Result<GraphState, GraphError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| GraphError::CorruptSnapshot(format!("not utf-8: {e}")))?;

    let mut state = GraphState::new();
    let mut saw_meta = false;

    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line).map_err(|e| {
            GraphError::CorruptSnapshot(format!("line {}: {e}", lineno + 1))
        })?;
        match record {
            Record::Meta { batch_index, version } => {
                if saw_meta {
                    return Err(GraphError::CorruptSnapshot("duplicate meta record".into()));
                }
                if version != FORMAT_VERSION {
                    return Err(GraphError::CorruptSnapshot(format!(
                        "unsupported format version {version}"
                    )));
                }
                saw_meta = true;
                state.batch_index = batch_index;
            }
            Record::Entity(node) => {
                if state.entities.insert(node.entity_id.clone(), node.clone()).is_some() {
                    return Err(GraphError::CorruptSnapshot(format!(
                        "duplicate entity {}",
                        node.entity_id
                    )));
                }
            }
            Record::Edge(edge) => {
                if edge.evidence.is_empty() {
                    return Err(GraphError::CorruptSnapshot(format!(
                        "edge {} has no evidence",
                        edge.edge_id
                    )));
                }
                let deprecated = edge.status == EdgeStatus::Deprecated;
                if deprecated != edge.deprecated_at_batch.is_some() {
                    return Err(GraphError::CorruptSnapshot(format!(
                        "edge {} status disagrees with deprecation stamp",
                        edge.edge_id
                    )));
                }
                if state.edges.insert(edge.edge_id.clone(), edge.clone()).is_some() {
                    return Err(GraphError::CorruptSnapshot(format!(
                        "duplicate edge {}",
                        edge.edge_id
                    )));
                }
            }
            Record::Deprecation(rec) => state.deprecation_log.push(rec),
        }
    }

    if !saw_meta {
        return Err(GraphError::CorruptSnapshot("missing meta record".into()));
    }
    for edge in state.edges.values() {
        if !state.entities.contains_key(&edge.head) {
            return Err(GraphError::CorruptSnapshot(format!(
                "edge {} references unknown head {}",
                edge.edge_id, edge.head
            )));
        }
        if let Some(tail) = edge.tail.as_entity() {
            if !state.entities.contains_key(tail) {
                return Err(GraphError::CorruptSnapshot(format!(
                    "edge {} references unknown tail {tail}",
                    edge.edge_id
                )));
            }
        }
    }
    let logged = state.deprecation_log.len();
    let deprecated = state.edges.values().filter(|e| !e.is_active()).count();
    if logged != deprecated {
        return Err(GraphError::CorruptSnapshot(format!(
            "{deprecated} deprecated edges but {logged} log entries"
        )));
    }
    Ok(state)
}
