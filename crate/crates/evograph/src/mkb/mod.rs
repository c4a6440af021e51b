//! The meta-knowledge base: entity profiles, promoted schemas, the schema
//! proposal pool, and the event index that supports cross-batch alignment.
//!
//! Retrieval is an exact cosine scan over the stored embeddings. At the
//! scale this store is designed for the scan is the index; the interface
//! leaves room for an approximate backend later, but results here are never
//! approximate. Writes are serialized per batch and each write synchronizes
//! the relevant index before returning, so a retrieval issued after a write
//! observes it.

mod snapshot;

use crate::adapters::EmbeddingVector;
use crate::config::EventMatchWeights;
use crate::extract::grammar;
use crate::ids::{EntityId, EventId, SchemaId};
use crate::par;
use crate::time::{self, TimeRef};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MkbError {
    #[error("embedding dimension mismatch: index holds {expected}, query has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("a schema labelled `{0}` is already promoted")]
    DuplicateSchemaLabel(String),
    #[error("invalid proposal: {0}")]
    InvalidProposal(String),
    #[error("corrupt MKB snapshot: {0}")]
    CorruptSnapshot(String),
}

/// Canonical relation-label form: lowercase, whitespace collapsed to
/// underscores, head verb lemmatized through the deterministic rule table
/// (`acquired_by` → `acquire_by`).
pub fn normalize_relation_label(label: &str) -> String {
    let mut flat = String::with_capacity(label.len());
    let mut pending = false;
    for ch in label.trim().chars() {
        if ch.is_whitespace() {
            pending = true;
        } else {
            if pending && !flat.is_empty() {
                flat.push('_');
            }
            pending = false;
            flat.push(ch.to_ascii_lowercase());
        }
    }
    let mut segments: Vec<String> = flat.split('_').map(str::to_string).collect();
    if let Some(first) = segments.first_mut() {
        *first = grammar::lemma_of(first);
    }
    segments.join("_")
}

/// A consolidated description of one entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityProfile {
    pub entity_id: EntityId,
    pub canonical_name: String,
    pub aliases: BTreeSet<String>,
    pub entity_type: String,
    pub key_attributes: BTreeMap<String, String>,
    pub last_updated_batch: u64,
    pub embedding: EmbeddingVector,
}

impl EntityProfile {
    pub fn new(
        entity_id: EntityId,
        canonical_name: impl Into<String>,
        entity_type: impl Into<String>,
        batch: u64,
        embedding: EmbeddingVector,
    ) -> Self {
        let canonical_name = canonical_name.into();
        let mut aliases = BTreeSet::new();
        aliases.insert(canonical_name.clone());
        Self {
            entity_id,
            canonical_name,
            aliases,
            entity_type: entity_type.into(),
            key_attributes: BTreeMap::new(),
            last_updated_batch: batch,
            embedding,
        }
    }
}

/// Algebraic properties a promoted relation schema may carry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaProperty {
    Symmetric,
    AntiSymmetric,
    Irreflexive,
    InverseOf(SchemaId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSchema {
    pub schema_id: SchemaId,
    pub relation_label: String,
    pub domain_type: String,
    pub range_type: String,
    pub properties: BTreeSet<SchemaProperty>,
    pub support_count: u32,
    pub embedding: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRole {
    pub role_name: String,
    pub type_constraint: String,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSchema {
    pub schema_id: SchemaId,
    pub event_type: String,
    pub trigger_lemmas: BTreeSet<String>,
    pub roles: Vec<EventRole>,
    pub support_count: u32,
    pub embedding: EmbeddingVector,
}

impl EventSchema {
    pub fn role(&self, name: &str) -> Option<&EventRole> {
        self.roles.iter().find(|r| r.role_name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalStatus {
    Pending,
    Promoted,
    Rejected,
}

/// Accumulated evidence behind a candidate schema. Counts survive across
/// batches so a pending proposal re-enters clustering with its history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateSchema {
    Relation {
        /// label → occurrence count
        member_labels: BTreeMap<String, u32>,
        head_types: BTreeMap<String, u32>,
        tail_types: BTreeMap<String, u32>,
    },
    Event {
        /// trigger lemma → occurrence count
        trigger_lemmas: BTreeMap<String, u32>,
        /// role name → instances binding it
        role_counts: BTreeMap<String, u32>,
        /// role name → filler type → count
        role_types: BTreeMap<String, BTreeMap<String, u32>>,
    },
}

impl CandidateSchema {
    /// Majority member label (ties broken lexicographically).
    pub fn canonical_label(&self) -> String {
        let labels = match self {
            CandidateSchema::Relation { member_labels, .. } => member_labels,
            CandidateSchema::Event { trigger_lemmas, .. } => trigger_lemmas,
        };
        labels
            .iter()
            .max_by(|(la, ca), (lb, cb)| ca.cmp(cb).then(lb.cmp(la)))
            .map(|(l, _)| l.clone())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaProposal {
    pub candidate: CandidateSchema,
    pub support_count: u32,
    /// Mean pairwise cosine of member embeddings; 1.0 for singletons.
    pub coherence: f32,
    pub status: ProposalStatus,
    pub member_instances: Vec<String>,
}

/// One canonical event registered for cross-batch alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedEvent {
    pub event_id: EventId,
    pub trigger_lemma: String,
    pub embedding: EmbeddingVector,
    pub roles: BTreeMap<String, EntityId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeRef>,
}

impl IndexedEvent {
    /// The bound entities, used as key arguments during matching.
    pub fn key_args(&self) -> BTreeSet<EntityId> {
        self.roles.values().cloned().collect()
    }
}

/// Kind tag carried by retrieval hits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaKind {
    Relation,
    Event,
}

impl std::fmt::Display for SchemaKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SchemaKind::Relation => f.write_str("relation"),
            SchemaKind::Event => f.write_str("event"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaHit {
    pub schema_id: SchemaId,
    pub label: String,
    pub kind: SchemaKind,
    pub score: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventMatch {
    pub event_id: EventId,
    pub score: f32,
}

/// The meta-knowledge base.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mkb {
    profiles: BTreeMap<EntityId, EntityProfile>,
    alias_index: BTreeMap<String, BTreeSet<EntityId>>,
    relation_schemas: BTreeMap<SchemaId, RelationSchema>,
    relation_labels: BTreeMap<String, SchemaId>,
    event_schemas: BTreeMap<SchemaId, EventSchema>,
    event_types: BTreeMap<String, SchemaId>,
    proposals: Vec<SchemaProposal>,
    event_index: BTreeMap<EventId, IndexedEvent>,
}

impl Mkb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
            && self.relation_schemas.is_empty()
            && self.event_schemas.is_empty()
            && self.proposals.is_empty()
            && self.event_index.is_empty()
    }

    pub fn profiles(&self) -> impl Iterator<Item = &EntityProfile> {
        self.profiles.values()
    }

    pub fn profile(&self, id: &EntityId) -> Option<&EntityProfile> {
        self.profiles.get(id)
    }

    pub fn relation_schemas(&self) -> impl Iterator<Item = &RelationSchema> {
        self.relation_schemas.values()
    }

    pub fn event_schemas(&self) -> impl Iterator<Item = &EventSchema> {
        self.event_schemas.values()
    }

    pub fn promoted_schema_count(&self) -> usize {
        self.relation_schemas.len() + self.event_schemas.len()
    }

    pub fn relation_schema_by_label(&self, normalized_label: &str) -> Option<&RelationSchema> {
        self.relation_labels.get(normalized_label).and_then(|id| self.relation_schemas.get(id))
    }

    /// Find the event schema whose type or trigger lexicon covers a lemma.
    pub fn event_schema_for_trigger(&self, trigger_lemma: &str) -> Option<&EventSchema> {
        if let Some(id) = self.event_types.get(trigger_lemma) {
            return self.event_schemas.get(id);
        }
        self.event_schemas
            .values()
            .find(|s| s.trigger_lemmas.contains(trigger_lemma))
    }

    /// Every stashed proposal, resolved ones included; pool order.
    pub fn proposals(&self) -> &[SchemaProposal] {
        &self.proposals
    }

    pub fn pending_proposal_count(&self) -> usize {
        self.proposals.iter().filter(|p| p.status == ProposalStatus::Pending).count()
    }

    /// Remove and return the pending proposals so induction can re-cluster
    /// them together with the new batch; resolved proposals stay behind as
    /// the audit trail.
    pub fn drain_pending_proposals(&mut self) -> Vec<SchemaProposal> {
        let (pending, kept): (Vec<_>, Vec<_>) = std::mem::take(&mut self.proposals)
            .into_iter()
            .partition(|p| p.status == ProposalStatus::Pending);
        self.proposals = kept;
        pending
    }

    /// Stash a proposal — pending ones for re-evaluation with more data,
    /// resolved ones for the record. Member instances are never dropped.
    pub fn stash_proposal(&mut self, proposal: SchemaProposal) {
        self.proposals.push(proposal);
    }

    pub fn indexed_events(&self) -> impl Iterator<Item = &IndexedEvent> {
        self.event_index.values()
    }

    fn expected_dimension(&self) -> Option<usize> {
        self.profiles
            .values()
            .map(|p| p.embedding.dimension())
            .chain(self.relation_schemas.values().map(|s| s.embedding.dimension()))
            .chain(self.event_schemas.values().map(|s| s.embedding.dimension()))
            .find(|d| *d > 0)
    }

    fn check_dimension(&self, query: &EmbeddingVector) -> Result<(), MkbError> {
        if let Some(expected) = self.expected_dimension() {
            if expected != query.dimension() {
                return Err(MkbError::DimensionMismatch {
                    expected,
                    found: query.dimension(),
                });
            }
        }
        Ok(())
    }

    /// Top-`k` promoted schemas by cosine similarity; ties break by schema
    /// id. The scan is exhaustive, so ranking is exact by construction.
    pub fn retrieve_schemas(
        &self,
        query: &EmbeddingVector,
        k: usize,
    ) -> Result<Vec<SchemaHit>, MkbError> {
        self.check_dimension(query)?;
        let candidates: Vec<(&SchemaId, SchemaKind)> = self
            .relation_schemas
            .keys()
            .map(|id| (id, SchemaKind::Relation))
            .chain(self.event_schemas.keys().map(|id| (id, SchemaKind::Event)))
            .collect();
        let mut hits: Vec<SchemaHit> = par::map_slice(&candidates, |(id, kind)| match kind {
            SchemaKind::Relation => {
                let s = &self.relation_schemas[*id];
                SchemaHit {
                    schema_id: s.schema_id.clone(),
                    label: s.relation_label.clone(),
                    kind: SchemaKind::Relation,
                    score: s.embedding.cosine(query),
                }
            }
            SchemaKind::Event => {
                let s = &self.event_schemas[*id];
                SchemaHit {
                    schema_id: s.schema_id.clone(),
                    label: s.event_type.clone(),
                    kind: SchemaKind::Event,
                    score: s.embedding.cosine(query),
                }
            }
        });
        hits.sort_by(|a, b| {
            b.score.total_cmp(&a.score).then_with(|| a.schema_id.cmp(&b.schema_id))
        });
        hits.truncate(k);
        Ok(hits)
    }

    /// Top-`n` entity profiles by embedding cosine; ties break by entity id.
    pub fn match_entity(
        &self,
        query: &EmbeddingVector,
        n: usize,
    ) -> Result<Vec<(EntityId, f32)>, MkbError> {
        self.check_dimension(query)?;
        let profiles: Vec<&EntityProfile> = self.profiles.values().collect();
        let mut scored: Vec<(EntityId, f32)> =
            par::map_slice(&profiles, |p| (p.entity_id.clone(), p.embedding.cosine(query)));
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(n);
        Ok(scored)
    }

    /// Exact (case-insensitive) alias lookup, ordered by entity id.
    pub fn lookup_alias(&self, name: &str) -> Vec<&EntityProfile> {
        self.alias_index
            .get(&name.to_lowercase())
            .map(|ids| ids.iter().filter_map(|id| self.profiles.get(id)).collect())
            .unwrap_or_default()
    }

    /// Score indexed events against a query event. Events whose time is
    /// provably disjoint from the query window are excluded outright; the
    /// rest score by the weighted combination of trigger cosine, argument
    /// overlap, and time compatibility.
    pub fn match_event(
        &self,
        trigger_embedding: &EmbeddingVector,
        key_args: &BTreeSet<EntityId>,
        time_window: Option<&TimeRef>,
        weights: &EventMatchWeights,
    ) -> Vec<EventMatch> {
        let (w_trigger, w_args, w_time) = weights.normalized();
        let events: Vec<&IndexedEvent> = self.event_index.values().collect();
        let mut scored: Vec<EventMatch> = par::map_slice(&events, |ev| {
            let compat = time::compatibility(time_window, ev.time.as_ref());
            if compat.is_disjoint() {
                return EventMatch { event_id: ev.event_id.clone(), score: f32::NEG_INFINITY };
            }
            let trigger = ev.embedding.cosine(trigger_embedding);
            let args = argument_overlap(key_args, &ev.key_args());
            EventMatch {
                event_id: ev.event_id.clone(),
                score: w_trigger * trigger + w_args * args + w_time * compat.score(),
            }
        });
        scored.retain(|m| m.score.is_finite());
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.event_id.cmp(&b.event_id)));
        scored
    }

    /// Insert or merge an entity profile: aliases union, key attributes
    /// overwritten per key, embedding and type refreshed. The alias index
    /// reflects the write before this returns.
    pub fn upsert_entity_profile(&mut self, profile: EntityProfile) {
        let mut profile = profile;
        profile.aliases.insert(profile.canonical_name.clone());
        let merged = match self.profiles.remove(&profile.entity_id) {
            None => profile,
            Some(mut existing) => {
                existing.aliases.extend(profile.aliases);
                for (k, v) in profile.key_attributes {
                    existing.key_attributes.insert(k, v);
                }
                existing.entity_type = profile.entity_type;
                existing.embedding = profile.embedding;
                existing.last_updated_batch =
                    existing.last_updated_batch.max(profile.last_updated_batch);
                existing
            }
        };
        for alias in &merged.aliases {
            self.alias_index
                .entry(alias.to_lowercase())
                .or_default()
                .insert(merged.entity_id.clone());
        }
        self.profiles.insert(merged.entity_id.clone(), merged);
    }

    /// Promote a relation schema. Labels are unique among promoted relation
    /// schemas; callers must merge into the existing schema instead.
    pub fn register_relation_schema(&mut self, schema: RelationSchema) -> Result<SchemaId, MkbError> {
        if self.relation_labels.contains_key(&schema.relation_label) {
            return Err(MkbError::DuplicateSchemaLabel(schema.relation_label));
        }
        let id = schema.schema_id.clone();
        self.relation_labels.insert(schema.relation_label.clone(), id.clone());
        self.relation_schemas.insert(id.clone(), schema);
        Ok(id)
    }

    /// Promote an event schema; event types are unique.
    pub fn register_event_schema(&mut self, schema: EventSchema) -> Result<SchemaId, MkbError> {
        if self.event_types.contains_key(&schema.event_type) {
            return Err(MkbError::DuplicateSchemaLabel(schema.event_type));
        }
        let id = schema.schema_id.clone();
        self.event_types.insert(schema.event_type.clone(), id.clone());
        self.event_schemas.insert(id.clone(), schema);
        Ok(id)
    }

    /// Add support to an already-promoted relation schema.
    pub fn bump_relation_support(&mut self, normalized_label: &str, by: u32) {
        if let Some(id) = self.relation_labels.get(normalized_label) {
            if let Some(s) = self.relation_schemas.get_mut(id) {
                s.support_count += by;
            }
        }
    }

    /// Add support to an already-promoted event schema.
    pub fn bump_event_support(&mut self, event_type: &str, by: u32) {
        if let Some(id) = self.event_types.get(event_type) {
            if let Some(s) = self.event_schemas.get_mut(id) {
                s.support_count += by;
            }
        }
    }

    /// Register a canonical event for cross-batch alignment.
    pub fn register_event(&mut self, event: IndexedEvent) {
        self.event_index.insert(event.event_id.clone(), event);
    }

    /// Deterministic snapshot of the whole MKB.
    pub fn snapshot(&self) -> Vec<u8> {
        snapshot::snapshot(self)
    }

    pub fn restore(bytes: &[u8]) -> Result<Self, MkbError> {
        snapshot::restore(bytes)
    }
}

/// Jaccard overlap of two argument sets; two empty sets count as identical.
fn argument_overlap(a: &BTreeSet<EntityId>, b: &BTreeSet<EntityId>) -> f32 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let intersection = a.intersection(b).count() as f32;
    let union = a.union(b).count() as f32;
    intersection / union
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::mock::MockEmbedder;
    use crate::adapters::Embedder;
    use crate::ids::schema_id;

    fn embed(text: &str) -> EmbeddingVector {
        MockEmbedder::default().embed_one(text).unwrap()
    }

    fn relation_schema(label: &str, support: u32) -> RelationSchema {
        RelationSchema {
            schema_id: schema_id("rel", label),
            relation_label: label.to_string(),
            domain_type: "Entity".into(),
            range_type: "Entity".into(),
            properties: BTreeSet::new(),
            support_count: support,
            embedding: embed(label),
        }
    }

    #[test]
    fn label_normalization() {
        assert_eq!(normalize_relation_label("Acquired By"), "acquire_by");
        assert_eq!(normalize_relation_label("located_in"), "located_in");
        assert_eq!(normalize_relation_label("rdf:type"), "rdf:type");
        assert_eq!(normalize_relation_label("  IS_A "), "is_a");
    }

    #[test]
    fn empty_mkb_retrieves_nothing() {
        let mkb = Mkb::new();
        let hits = mkb.retrieve_schemas(&embed("anything"), 30).unwrap();
        assert!(hits.is_empty());
        assert!(mkb.match_entity(&embed("anything"), 5).unwrap().is_empty());
    }

    #[test]
    fn retrieval_matches_brute_force_scan() {
        let mut mkb = Mkb::new();
        let labels = ["is_a", "located_in", "part_of", "vendor", "supports"];
        for l in labels {
            mkb.register_relation_schema(relation_schema(l, 3)).unwrap();
        }
        let query = embed("located_at");
        let hits = mkb.retrieve_schemas(&query, 30).unwrap();
        assert_eq!(hits.len(), 5, "k larger than the store returns everything");

        // Independent full scan.
        let mut oracle: Vec<(String, f32)> = labels
            .iter()
            .map(|l| (l.to_string(), embed(l).cosine(&query)))
            .collect();
        oracle.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| schema_id("rel", &a.0).cmp(&schema_id("rel", &b.0)))
        });
        let got: Vec<(String, f32)> = hits.into_iter().map(|h| (h.label, h.score)).collect();
        assert_eq!(got, oracle);
    }

    #[test]
    fn retrieval_caps_at_k() {
        let mut mkb = Mkb::new();
        for i in 0..40 {
            mkb.register_relation_schema(relation_schema(&format!("relation_{i}"), 3)).unwrap();
        }
        let hits = mkb.retrieve_schemas(&embed("relation_7"), 30).unwrap();
        assert_eq!(hits.len(), 30);
        assert_eq!(hits[0].label, "relation_7", "self-similarity ranks first");
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut mkb = Mkb::new();
        mkb.register_relation_schema(relation_schema("is_a", 3)).unwrap();
        let bad = EmbeddingVector::new(vec![1.0, 0.0]);
        assert_eq!(
            mkb.retrieve_schemas(&bad, 5),
            Err(MkbError::DimensionMismatch { expected: 256, found: 2 })
        );
    }

    #[test]
    fn duplicate_schema_label_rejected() {
        let mut mkb = Mkb::new();
        mkb.register_relation_schema(relation_schema("is_a", 3)).unwrap();
        assert_eq!(
            mkb.register_relation_schema(relation_schema("is_a", 4)),
            Err(MkbError::DuplicateSchemaLabel("is_a".into()))
        );
    }

    #[test]
    fn upsert_is_idempotent_and_merges_aliases() {
        let mut mkb = Mkb::new();
        let id = EntityId::from("kubernetes.b0.aaaa");
        let mut p1 = EntityProfile::new(id.clone(), "Kubernetes", "Platform", 0, embed("Kubernetes"));
        p1.key_attributes.insert("vendor".into(), "CNCF".into());
        mkb.upsert_entity_profile(p1.clone());
        mkb.upsert_entity_profile(p1.clone());
        assert_eq!(mkb.profiles().count(), 1);
        let stored = mkb.profile(&id).unwrap().clone();

        let mut p2 = p1.clone();
        p2.aliases = BTreeSet::from(["K8s".to_string()]);
        p2.last_updated_batch = 1;
        mkb.upsert_entity_profile(p2);
        let merged = mkb.profile(&id).unwrap();
        assert!(merged.aliases.is_superset(&stored.aliases), "aliases never shrink");
        assert!(merged.aliases.contains("K8s"));
        assert_eq!(merged.last_updated_batch, 1);
        assert_eq!(mkb.lookup_alias("k8s")[0].entity_id, id);
    }

    #[test]
    fn read_your_writes_for_schemas() {
        let mut mkb = Mkb::new();
        let schema = relation_schema("supports", 3);
        let query = schema.embedding.clone();
        mkb.register_relation_schema(schema).unwrap();
        let hits = mkb.retrieve_schemas(&query, 1).unwrap();
        assert_eq!(hits[0].label, "supports");
        assert!((hits[0].score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exact_alias_profile_ranks_first_with_orthogonal_embeddings() {
        use crate::adapters::mock::FixtureEmbedder;
        let mut embedder = FixtureEmbedder::new(3);
        embedder.set("Kubernetes", vec![1.0, 0.0, 0.0]);
        embedder.set("Docker", vec![0.0, 1.0, 0.0]);
        embedder.set("Helm", vec![0.0, 0.0, 1.0]);
        embedder.set("K8s", vec![1.0, 0.0, 0.0]); // alias query, same direction

        let mut mkb = Mkb::new();
        for name in ["Kubernetes", "Docker", "Helm"] {
            let mut profile = EntityProfile::new(
                EntityId::from(format!("{}.b1.x", name.to_lowercase()).as_str()),
                name,
                "Entity",
                0,
                embedder.embed_one(name).unwrap(),
            );
            if name == "Kubernetes" {
                profile.aliases.insert("K8s".into());
            }
            mkb.upsert_entity_profile(profile);
        }

        let hits = mkb.match_entity(&embedder.embed_one("K8s").unwrap(), 2).unwrap();
        assert_eq!(hits[0].0, EntityId::from("kubernetes.b1.x"));
        assert!((hits[0].1 - 1.0).abs() < 1e-6);

        // n larger than the profile count returns everything
        let all = mkb.match_entity(&embedder.embed_one("K8s").unwrap(), 10).unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn event_match_scores_and_gates() {
        let mut mkb = Mkb::new();
        let roles: BTreeMap<String, EntityId> = BTreeMap::from([
            ("acquirer".to_string(), EntityId::from("a")),
            ("acquired".to_string(), EntityId::from("b")),
        ]);
        let args: BTreeSet<EntityId> = roles.values().cloned().collect();
        mkb.register_event(IndexedEvent {
            event_id: EventId::from("evt.1"),
            trigger_lemma: "acquire".into(),
            embedding: embed("acquire"),
            roles,
            time: Some(TimeRef::year(2019)),
        });
        let weights = EventMatchWeights::default();

        // identical trigger + identical args + overlapping window → 1.0
        let m = mkb.match_event(&embed("acquire"), &args, Some(&TimeRef::year(2019)), &weights);
        assert_eq!(m.len(), 1);
        assert!((m[0].score - 1.0).abs() < 1e-6);

        // disjoint windows exclude the candidate outright
        let m = mkb.match_event(&embed("acquire"), &args, Some(&TimeRef::year(2023)), &weights);
        assert!(m.is_empty());

        // empty index
        let empty = Mkb::new();
        assert!(empty
            .match_event(&embed("acquire"), &args, None, &weights)
            .is_empty());
    }

    #[test]
    fn argument_overlap_is_jaccard() {
        let a: BTreeSet<EntityId> = [EntityId::from("x")].into();
        let b: BTreeSet<EntityId> = [EntityId::from("x"), EntityId::from("y")].into();
        assert!((argument_overlap(&a, &b) - 0.5).abs() < 1e-6);
        assert!((argument_overlap(&BTreeSet::new(), &BTreeSet::new()) - 1.0).abs() < 1e-6);
    }
}
