//! Versioned knowledge-graph store with soft deprecation.
//!
//! The store is append-only: facts are never physically deleted. Retiring a
//! fact flips its status to `Deprecated`, stamps the batch index, attaches
//! the justifying evidence, and appends to the deprecation log. The active
//! edge set after applying batch `k`'s increment is
//!
//! ```text
//! Active(k) = (Active(k-1) \ deprecations) ∪ new_facts
//! ```
//!
//! while storage only ever grows. Increments apply all-or-nothing: the next
//! state is staged on a copy and swapped in only after every write
//! succeeded, so any validation failure (or injected fault) leaves the
//! snapshot byte-identical.

mod snapshot;

pub use snapshot::restore;

use crate::ids::{edge_id, EdgeId, EntityId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// A piece of supporting text: the source document and the exact span.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Evidence {
    pub doc_id: String,
    pub span: String,
}

impl Evidence {
    pub fn new(doc_id: impl Into<String>, span: impl Into<String>) -> Self {
        Self { doc_id: doc_id.into(), span: span.into() }
    }
}

/// Edge lifecycle status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeStatus {
    Active,
    Deprecated,
}

/// Tail of a fact edge: another entity or a literal value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRef {
    Entity(EntityId),
    Literal(String),
}

impl TailRef {
    pub fn kind(&self) -> &'static str {
        match self {
            TailRef::Entity(_) => "entity",
            TailRef::Literal(_) => "literal",
        }
    }

    pub fn value(&self) -> &str {
        match self {
            TailRef::Entity(id) => id.as_str(),
            TailRef::Literal(s) => s,
        }
    }

    pub fn as_entity(&self) -> Option<&EntityId> {
        match self {
            TailRef::Entity(id) => Some(id),
            TailRef::Literal(_) => None,
        }
    }
}

/// An entity node. The id never changes after creation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityNode {
    pub entity_id: EntityId,
    pub canonical_name: String,
    pub entity_type: String,
    pub created_at_batch: u64,
}

/// A fact edge with lifecycle metadata and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactEdge {
    pub edge_id: EdgeId,
    pub head: EntityId,
    pub relation: String,
    pub tail: TailRef,
    pub status: EdgeStatus,
    pub evidence: Vec<Evidence>,
    pub created_at_batch: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deprecated_at_batch: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deprecation_evidence: Option<Evidence>,
}

impl FactEdge {
    /// Build an active edge; the id is derived from (head, relation, tail).
    pub fn active(
        head: EntityId,
        relation: impl Into<String>,
        tail: TailRef,
        evidence: Vec<Evidence>,
        created_at_batch: u64,
    ) -> Self {
        let relation = relation.into();
        let id = edge_id(&head, &relation, tail.kind(), tail.value());
        Self {
            edge_id: id,
            head,
            relation,
            tail,
            status: EdgeStatus::Active,
            evidence,
            created_at_batch,
            deprecated_at_batch: None,
            deprecation_evidence: None,
        }
    }

    pub fn is_active(&self) -> bool {
        self.status == EdgeStatus::Active
    }
}

/// One deprecation-log entry; the log is append-only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeprecationRecord {
    pub batch_index: u64,
    pub edge_id: EdgeId,
    pub evidence: Evidence,
}

/// The per-batch delta applied transactionally.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct KnowledgeIncrement {
    pub batch_index: u64,
    pub new_entities: Vec<EntityNode>,
    pub new_facts: Vec<FactEdge>,
    pub deprecations: Vec<(EdgeId, Evidence)>,
}

impl KnowledgeIncrement {
    pub fn empty(batch_index: u64) -> Self {
        Self { batch_index, ..Default::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.new_entities.is_empty() && self.new_facts.is_empty() && self.deprecations.is_empty()
    }
}

/// Injectable failure points inside increment application, used by the
/// atomicity tests. Each fires after the named prefix of staged writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultPoint {
    AfterValidate,
    AfterEntityWrites,
    MidFactWrites,
    AfterFactWrites,
    AfterDeprecationWrites,
    BeforeCommit,
}

impl FaultPoint {
    pub const ALL: [FaultPoint; 6] = [
        FaultPoint::AfterValidate,
        FaultPoint::AfterEntityWrites,
        FaultPoint::MidFactWrites,
        FaultPoint::AfterFactWrites,
        FaultPoint::AfterDeprecationWrites,
        FaultPoint::BeforeCommit,
    ];
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("increment batch index {found} does not follow state batch index {state}")]
    BatchIndexMismatch { state: u64, found: u64 },
    #[error("deprecation target {0} is not an active edge")]
    UnknownDeprecationTarget(EdgeId),
    #[error("fact {edge} references unknown entity {entity}")]
    DanglingEntityReference { edge: EdgeId, entity: EntityId },
    #[error("increment both asserts and deprecates edge {0}")]
    ConflictingIncrement(EdgeId),
    #[error("increment contains duplicate fact edge {0}")]
    DuplicateFact(EdgeId),
    #[error("entity {0} already exists")]
    DuplicateEntity(EntityId),
    #[error("fact edge {0} carries no evidence")]
    MissingEvidence(EdgeId),
    #[error("injected fault at {0:?}")]
    FaultInjected(FaultPoint),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
}

/// What actually happened while applying an increment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApplyOutcome {
    /// Edges that did not exist before and were created.
    pub created: Vec<EdgeId>,
    /// Re-assertions of already-active edges; evidence was merged.
    pub merged: Vec<EdgeId>,
    /// Re-assertions of deprecated edges; surfaced, never resurrected.
    pub resurrection_conflicts: Vec<EdgeId>,
    /// Edges flipped to `Deprecated` by this increment.
    pub deprecated: Vec<EdgeId>,
    /// Entities created by this increment.
    pub entities_created: Vec<EntityId>,
}

/// The versioned graph. `batch_index` counts applied batches, so a fresh
/// store is version 0 and applying window `w` yields version `w + 1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphState {
    pub batch_index: u64,
    pub entities: BTreeMap<EntityId, EntityNode>,
    pub edges: BTreeMap<EdgeId, FactEdge>,
    pub deprecation_log: Vec<DeprecationRecord>,
}

impl GraphState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity(&self, id: &EntityId) -> Option<&EntityNode> {
        self.entities.get(id)
    }

    pub fn edge(&self, id: &EdgeId) -> Option<&FactEdge> {
        self.edges.get(id)
    }

    /// Ids of all currently active edges.
    pub fn active_edge_ids(&self) -> BTreeSet<EdgeId> {
        self.edges
            .values()
            .filter(|e| e.is_active())
            .map(|e| e.edge_id.clone())
            .collect()
    }

    /// Active edges incident to `entity_id` (as head or entity tail),
    /// ordered by edge id. Unknown entities yield an empty list.
    pub fn active_facts(&self, entity_id: &EntityId) -> Vec<&FactEdge> {
        // BTreeMap iteration already orders by edge id.
        self.edges
            .values()
            .filter(|e| e.is_active())
            .filter(|e| &e.head == entity_id || e.tail.as_entity() == Some(entity_id))
            .collect()
    }

    /// All edges (any status) incident to `entity_id`, ordered by edge id.
    pub fn incident_edges(&self, entity_id: &EntityId) -> Vec<&FactEdge> {
        self.edges
            .values()
            .filter(|e| &e.head == entity_id || e.tail.as_entity() == Some(entity_id))
            .collect()
    }

    /// Validate an increment against this state without mutating anything.
    pub fn validate_increment(&self, inc: &KnowledgeIncrement) -> Result<(), GraphError> {
        if inc.batch_index != self.batch_index + 1 {
            return Err(GraphError::BatchIndexMismatch {
                state: self.batch_index,
                found: inc.batch_index,
            });
        }

        let mut incoming_entities: BTreeSet<&EntityId> = BTreeSet::new();
        for node in &inc.new_entities {
            if self.entities.contains_key(&node.entity_id) {
                return Err(GraphError::DuplicateEntity(node.entity_id.clone()));
            }
            if !incoming_entities.insert(&node.entity_id) {
                return Err(GraphError::DuplicateEntity(node.entity_id.clone()));
            }
        }

        let deprecation_ids: BTreeSet<&EdgeId> = inc.deprecations.iter().map(|(id, _)| id).collect();
        for id in &deprecation_ids {
            match self.edges.get(id) {
                Some(edge) if edge.is_active() => {}
                _ => return Err(GraphError::UnknownDeprecationTarget((*id).clone())),
            }
        }

        let known = |id: &EntityId| {
            self.entities.contains_key(id) || incoming_entities.contains(id)
        };
        let mut seen_facts: BTreeSet<&EdgeId> = BTreeSet::new();
        for fact in &inc.new_facts {
            if !seen_facts.insert(&fact.edge_id) {
                return Err(GraphError::DuplicateFact(fact.edge_id.clone()));
            }
            if deprecation_ids.contains(&fact.edge_id) {
                return Err(GraphError::ConflictingIncrement(fact.edge_id.clone()));
            }
            if fact.evidence.is_empty() {
                return Err(GraphError::MissingEvidence(fact.edge_id.clone()));
            }
            if !known(&fact.head) {
                return Err(GraphError::DanglingEntityReference {
                    edge: fact.edge_id.clone(),
                    entity: fact.head.clone(),
                });
            }
            if let Some(tail) = fact.tail.as_entity() {
                if !known(tail) {
                    return Err(GraphError::DanglingEntityReference {
                        edge: fact.edge_id.clone(),
                        entity: tail.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Apply an increment atomically, returning what changed.
    pub fn apply_increment(&mut self, inc: &KnowledgeIncrement) -> Result<ApplyOutcome, GraphError> {
        self.apply_increment_with_fault(inc, None)
    }

    /// Apply with an optional injected fault. All writes are staged on a
    /// copy of the state; the live state is replaced only at commit, so an
    /// abort at any point leaves `self` untouched.
    pub fn apply_increment_with_fault(
        &mut self,
        inc: &KnowledgeIncrement,
        fault: Option<FaultPoint>,
    ) -> Result<ApplyOutcome, GraphError> {
        let trip = |point: FaultPoint| -> Result<(), GraphError> {
            if fault == Some(point) {
                Err(GraphError::FaultInjected(point))
            } else {
                Ok(())
            }
        };

        self.validate_increment(inc)?;
        trip(FaultPoint::AfterValidate)?;

        let mut staged = self.clone();
        let mut outcome = ApplyOutcome::default();
        staged.batch_index = inc.batch_index;

        for node in &inc.new_entities {
            staged.entities.insert(node.entity_id.clone(), node.clone());
            outcome.entities_created.push(node.entity_id.clone());
        }
        trip(FaultPoint::AfterEntityWrites)?;

        let mid = inc.new_facts.len() / 2;
        for (i, fact) in inc.new_facts.iter().enumerate() {
            if i == mid {
                trip(FaultPoint::MidFactWrites)?;
            }
            match staged.edges.get_mut(&fact.edge_id) {
                None => {
                    staged.edges.insert(fact.edge_id.clone(), fact.clone());
                    outcome.created.push(fact.edge_id.clone());
                }
                Some(existing) if existing.is_active() => {
                    // Idempotent re-assertion: merge evidence, keep the edge.
                    for ev in &fact.evidence {
                        if !existing.evidence.contains(ev) {
                            existing.evidence.push(ev.clone());
                        }
                    }
                    outcome.merged.push(fact.edge_id.clone());
                }
                Some(_) => {
                    // Re-asserting a deprecated fact never resurrects it;
                    // the conflict is surfaced to the caller.
                    outcome.resurrection_conflicts.push(fact.edge_id.clone());
                }
            }
        }
        trip(FaultPoint::AfterFactWrites)?;

        for (id, evidence) in &inc.deprecations {
            let edge = staged
                .edges
                .get_mut(id)
                .expect("validated deprecation target");
            if !edge.is_active() {
                // Two deprecation entries for the same edge within one
                // increment; the first one wins, later ones are no-ops.
                continue;
            }
            edge.status = EdgeStatus::Deprecated;
            edge.deprecated_at_batch = Some(inc.batch_index);
            edge.deprecation_evidence = Some(evidence.clone());
            staged.deprecation_log.push(DeprecationRecord {
                batch_index: inc.batch_index,
                edge_id: id.clone(),
                evidence: evidence.clone(),
            });
            outcome.deprecated.push(id.clone());
        }
        trip(FaultPoint::AfterDeprecationWrites)?;
        trip(FaultPoint::BeforeCommit)?;

        *self = staged;
        Ok(outcome)
    }

    /// Deterministic full-state snapshot.
    pub fn snapshot(&self) -> Vec<u8> {
        snapshot::snapshot(self)
    }

    /// Deterministic export of entities and edges (no meta / log records);
    /// the unit of byte-exact comparison.
    pub fn export(&self) -> Vec<u8> {
        snapshot::export(self)
    }
}
