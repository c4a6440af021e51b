//! The per-batch audit record.
//!
//! A report is written for every batch, including aborted ones. Everything
//! persisted is deterministic; wall-clock stage timings stay in memory (and
//! on stderr in the CLI) but are excluded from the serialized form so that
//! equal runs produce equal report bytes.

use crate::graph::Evidence;
use crate::ids::{EdgeId, EntityId, SchemaId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedCandidate {
    pub fingerprint: String,
    /// Which check rejected it: `evidence`, `logic`, or `relationalize`.
    pub stage: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingCandidate {
    pub fingerprint: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictRecord {
    /// `resurrection` or `same_batch_assert_and_retire`.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_id: Option<EdgeId>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromotedSchemaSummary {
    pub schema_id: SchemaId,
    pub kind: String,
    pub label: String,
    pub support: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    /// Zero-based stream window this report describes.
    pub batch_index: u64,
    /// Edge ids created by this batch (the additions A of the metrics).
    pub additions: Vec<EdgeId>,
    /// Idempotent re-assertions whose evidence was merged.
    pub reasserted: Vec<EdgeId>,
    /// Soft deprecations executed this batch, with their evidence.
    pub deprecations: Vec<(EdgeId, Evidence)>,
    pub rejected: Vec<RejectedCandidate>,
    /// Candidates parked because a judge was unavailable.
    pub pending: Vec<PendingCandidate>,
    pub conflicts: Vec<ConflictRecord>,
    pub schemas_promoted: Vec<PromotedSchemaSummary>,
    /// Size of the proposal pool after this batch.
    pub proposals_pending: usize,
    pub entities_created: Vec<EntityId>,
    pub entities_reused: Vec<EntityId>,
    pub skipped_docs: Vec<String>,
    /// Schemas injected into the extraction context.
    pub context_schemas: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort: Option<String>,
    /// Wall-clock stage timings in microseconds; in-memory only.
    #[serde(skip)]
    pub timings_us: BTreeMap<String, u128>,
}

impl BatchReport {
    pub fn new(batch_index: u64) -> Self {
        Self { batch_index, ..Default::default() }
    }

    /// Additions and deprecations are disjoint by construction; assert it.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (id, _) in &self.deprecations {
            if self.additions.contains(id) {
                return Err(format!("edge {id} appears in both additions and deprecations"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        crate::jsonl::canonical_document(self)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
