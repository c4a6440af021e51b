//! Stage 3: schema evolution.
//!
//! Verified knowledge generalizes into schemas: relation labels (and event
//! triggers) are clustered by embedding similarity; a cluster whose
//! accumulated support reaches θ with sufficient coherence becomes a
//! proposal, and proposals that pass the evaluator are promoted into the
//! MKB. Everything else stays in the proposal pool and re-enters clustering
//! with its history on the next batch.
//!
//! Informational events are reified for uniform graph storage: one event
//! node, one `rdf:type` fact, one `has_<role>` fact per binding, and a
//! `has_time` fact when the instance carries a time. The mapping is
//! invertible — [`parse_event_node`] recovers trigger, roles, and time.

use crate::adapters::{AdapterError, Embedder, EmbeddingVector};
use crate::config::PipelineConfig;
use crate::extract::{EventInstance, ResolvedTriple};
use crate::graph::{EntityNode, FactEdge, TailRef};
use crate::ids::{mint_event_id, schema_id, EntityId};
use crate::mkb::{
    CandidateSchema, EventRole, EventSchema, Mkb, ProposalStatus, RelationSchema, SchemaProperty,
    SchemaProposal,
};
use crate::normalize::MentionCluster;
use crate::time::TimeRef;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("event {event} is missing required role {role}")]
    MissingRequiredRole { event: String, role: String },
    #[error("event role name `time` is reserved")]
    ReservedRoleName,
}

/// Decides whether a proposal is semantically complete and generalizable.
pub trait SchemaEvaluator: Send + Sync {
    fn evaluate_relation(
        &self,
        canonical_label: &str,
        member_labels: &[String],
    ) -> Result<bool, AdapterError>;

    fn evaluate_event(&self, event_type: &str, roles: &[String]) -> Result<bool, AdapterError>;
}

/// Majority entry of a count map; ties resolve to the most general type
/// (`Entity`). Used for domain/range and role-constraint inference.
fn majority_type(counts: &BTreeMap<String, u32>) -> String {
    let Some(max) = counts.values().max().copied() else {
        return "Entity".to_string();
    };
    let tied: Vec<&String> = counts.iter().filter(|(_, c)| **c == max).map(|(t, _)| t).collect();
    if tied.len() == 1 {
        tied[0].clone()
    } else {
        "Entity".to_string()
    }
}

fn add_count(map: &mut BTreeMap<String, u32>, key: &str, by: u32) {
    *map.entry(key.to_string()).or_insert(0) += by;
}

/// Single-link clustering of labelled points by embedding cosine.
fn cluster_labels(labels: &[String], embeddings: &[EmbeddingVector], tau: f32) -> Vec<Vec<usize>> {
    let n = labels.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if embeddings[i].cosine(&embeddings[j]) >= tau {
                let (ra, rb) = (find(&mut parent, i), find(&mut parent, j));
                if ra != rb {
                    let (lo, hi) = (ra.min(rb), ra.max(rb));
                    parent[hi] = lo;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Mean pairwise cosine of a cluster's member embeddings; 1.0 for
/// singletons.
fn coherence(embeddings: &[&EmbeddingVector]) -> f32 {
    let n = embeddings.len();
    if n <= 1 {
        return 1.0;
    }
    let mut sum = 0.0f32;
    let mut pairs = 0u32;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += embeddings[i].cosine(embeddings[j]);
            pairs += 1;
        }
    }
    sum / pairs as f32
}

/// Outcome of one induction pass.
#[derive(Debug, Clone, Default)]
pub struct RelationInduction {
    pub promoted: Vec<RelationSchema>,
    /// The promoted clusters as proposals (status `Promoted`), member
    /// instances intact — the audit trail behind each schema.
    pub resolved: Vec<SchemaProposal>,
    pub pending: Vec<SchemaProposal>,
    /// Normalized label → support folded into an already-promoted schema.
    pub merged_into_promoted: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, Default)]
pub struct EventInduction {
    pub promoted: Vec<EventSchema>,
    pub resolved: Vec<SchemaProposal>,
    pub pending: Vec<SchemaProposal>,
    pub merged_into_promoted: BTreeMap<String, u32>,
}

/// Accumulator for one relation-label cluster.
#[derive(Debug, Clone, Default)]
struct RelationBucket {
    count: u32,
    head_types: BTreeMap<String, u32>,
    tail_types: BTreeMap<String, u32>,
    members: Vec<String>,
    /// (head, tail) entity pairs seen this batch, for symmetry inference.
    pairs: BTreeSet<(EntityId, EntityId)>,
}

/// Induce relation schemas from this batch's verified triples plus the
/// drained pending pool. Clusters reaching θ support with coherent members
/// go to the evaluator; passed clusters are promoted, everything else
/// returns to the pool with accumulated counts.
pub fn induce_relation_schemas(
    triples: &[ResolvedTriple],
    entity_types: &BTreeMap<EntityId, String>,
    pending: Vec<SchemaProposal>,
    mkb: &Mkb,
    embedder: &dyn Embedder,
    evaluator: &dyn SchemaEvaluator,
    cfg: &PipelineConfig,
) -> Result<RelationInduction, AdapterError> {
    let type_of = |id: &EntityId| {
        entity_types.get(id).cloned().unwrap_or_else(|| "Entity".to_string())
    };

    // 1. bucket this batch's triples by (already normalized) label
    let mut buckets: BTreeMap<String, RelationBucket> = BTreeMap::new();
    for t in triples {
        let b = buckets.entry(t.relation.clone()).or_default();
        b.count += 1;
        add_count(&mut b.head_types, &type_of(&t.head), 1);
        let tail_type = match &t.tail {
            TailRef::Entity(id) => type_of(id),
            TailRef::Literal(_) => "Literal".to_string(),
        };
        add_count(&mut b.tail_types, &tail_type, 1);
        b.members.push(t.fingerprint());
        if let TailRef::Entity(tail) = &t.tail {
            b.pairs.insert((t.head.clone(), tail.clone()));
        }
    }

    // 2. fold in pending relation proposals
    for proposal in pending {
        if let CandidateSchema::Relation { member_labels, head_types, tail_types } =
            &proposal.candidate
        {
            for (label, count) in member_labels {
                let b = buckets.entry(label.clone()).or_default();
                b.count += count;
            }
            // spread the accumulated type counts over the proposal's
            // canonical label bucket
            let canonical = proposal.candidate.canonical_label();
            let b = buckets.entry(canonical).or_default();
            for (t, c) in head_types {
                add_count(&mut b.head_types, t, *c);
            }
            for (t, c) in tail_types {
                add_count(&mut b.tail_types, t, *c);
            }
            b.members.extend(proposal.member_instances.clone());
        }
    }

    let mut out = RelationInduction::default();

    // 3. labels already promoted only add support
    let mut open: Vec<(String, RelationBucket)> = Vec::new();
    for (label, bucket) in buckets {
        if mkb.relation_schema_by_label(&label).is_some() {
            add_count(&mut out.merged_into_promoted, &label, bucket.count);
        } else {
            open.push((label, bucket));
        }
    }
    if open.is_empty() {
        return Ok(out);
    }

    // 4. cluster the open labels
    let labels: Vec<String> = open.iter().map(|(l, _)| l.clone()).collect();
    let embeddings = embedder.embed(&labels)?;
    let clusters = cluster_labels(&labels, &embeddings, cfg.thresholds.tau_cluster);

    for cluster in clusters {
        let member_embeddings: Vec<&EmbeddingVector> = cluster.iter().map(|&i| &embeddings[i]).collect();
        let coherence = coherence(&member_embeddings);
        let mut member_labels: BTreeMap<String, u32> = BTreeMap::new();
        let mut head_types: BTreeMap<String, u32> = BTreeMap::new();
        let mut tail_types: BTreeMap<String, u32> = BTreeMap::new();
        let mut member_instances: Vec<String> = Vec::new();
        let mut pairs: BTreeSet<(EntityId, EntityId)> = BTreeSet::new();
        let mut support = 0u32;
        for &i in &cluster {
            let (label, bucket) = &open[i];
            support += bucket.count;
            add_count(&mut member_labels, label, bucket.count);
            for (t, c) in &bucket.head_types {
                add_count(&mut head_types, t, *c);
            }
            for (t, c) in &bucket.tail_types {
                add_count(&mut tail_types, t, *c);
            }
            member_instances.extend(bucket.members.clone());
            pairs.extend(bucket.pairs.iter().cloned());
        }

        let candidate = CandidateSchema::Relation {
            member_labels: member_labels.clone(),
            head_types: head_types.clone(),
            tail_types: tail_types.clone(),
        };
        let canonical = candidate.canonical_label();

        if support >= cfg.thresholds.theta && coherence >= cfg.thresholds.tau_coherence {
            let member_list: Vec<String> = member_labels.keys().cloned().collect();
            if evaluator.evaluate_relation(&canonical, &member_list)? {
                let mut properties = BTreeSet::new();
                if pairs
                    .iter()
                    .any(|(h, t)| h != t && pairs.contains(&(t.clone(), h.clone())))
                {
                    properties.insert(SchemaProperty::Symmetric);
                }
                out.promoted.push(RelationSchema {
                    schema_id: schema_id("rel", &canonical),
                    relation_label: canonical.clone(),
                    domain_type: majority_type(&head_types),
                    range_type: majority_type(&tail_types),
                    properties,
                    support_count: support,
                    embedding: embedder.embed_one(&canonical)?,
                });
                out.resolved.push(SchemaProposal {
                    candidate,
                    support_count: support,
                    coherence,
                    status: ProposalStatus::Promoted,
                    member_instances,
                });
                continue;
            }
        }
        out.pending.push(SchemaProposal {
            candidate,
            support_count: support,
            coherence,
            status: ProposalStatus::Pending,
            member_instances,
        });
    }
    Ok(out)
}

/// Accumulator for one event-trigger cluster.
#[derive(Debug, Clone, Default)]
struct EventBucket {
    count: u32,
    role_counts: BTreeMap<String, u32>,
    role_types: BTreeMap<String, BTreeMap<String, u32>>,
    members: Vec<String>,
}

/// Induce event schemas from this batch's verified events (either intent)
/// plus the drained pending pool.
pub fn induce_event_schemas(
    events: &[EventInstance],
    entity_types: &BTreeMap<EntityId, String>,
    pending: Vec<SchemaProposal>,
    mkb: &Mkb,
    embedder: &dyn Embedder,
    evaluator: &dyn SchemaEvaluator,
    cfg: &PipelineConfig,
) -> Result<EventInduction, AdapterError> {
    let type_of = |id: &EntityId| {
        entity_types.get(id).cloned().unwrap_or_else(|| "Entity".to_string())
    };

    let mut buckets: BTreeMap<String, EventBucket> = BTreeMap::new();
    for e in events {
        let b = buckets.entry(e.trigger_lemma.clone()).or_default();
        b.count += 1;
        for (role, filler) in &e.bindings {
            add_count(&mut b.role_counts, role, 1);
            add_count(b.role_types.entry(role.clone()).or_default(), &type_of(filler), 1);
        }
        b.members.push(e.fingerprint());
    }

    for proposal in pending {
        if let CandidateSchema::Event { trigger_lemmas, role_counts, role_types } =
            &proposal.candidate
        {
            for (lemma, count) in trigger_lemmas {
                buckets.entry(lemma.clone()).or_default().count += count;
            }
            let canonical = proposal.candidate.canonical_label();
            let b = buckets.entry(canonical).or_default();
            for (r, c) in role_counts {
                add_count(&mut b.role_counts, r, *c);
            }
            for (r, types) in role_types {
                let slot = b.role_types.entry(r.clone()).or_default();
                for (t, c) in types {
                    add_count(slot, t, *c);
                }
            }
            b.members.extend(proposal.member_instances.clone());
        }
    }

    let mut out = EventInduction::default();
    let mut open: Vec<(String, EventBucket)> = Vec::new();
    for (lemma, bucket) in buckets {
        if mkb.event_schema_for_trigger(&lemma).is_some() {
            add_count(&mut out.merged_into_promoted, &lemma, bucket.count);
        } else {
            open.push((lemma, bucket));
        }
    }
    if open.is_empty() {
        return Ok(out);
    }

    let lemmas: Vec<String> = open.iter().map(|(l, _)| l.clone()).collect();
    let embeddings = embedder.embed(&lemmas)?;
    let clusters = cluster_labels(&lemmas, &embeddings, cfg.thresholds.tau_cluster);

    for cluster in clusters {
        let member_embeddings: Vec<&EmbeddingVector> =
            cluster.iter().map(|&i| &embeddings[i]).collect();
        let coherence = coherence(&member_embeddings);
        let mut trigger_lemmas: BTreeMap<String, u32> = BTreeMap::new();
        let mut role_counts: BTreeMap<String, u32> = BTreeMap::new();
        let mut role_types: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        let mut member_instances: Vec<String> = Vec::new();
        let mut support = 0u32;
        for &i in &cluster {
            let (lemma, bucket) = &open[i];
            support += bucket.count;
            add_count(&mut trigger_lemmas, lemma, bucket.count);
            for (r, c) in &bucket.role_counts {
                add_count(&mut role_counts, r, *c);
            }
            for (r, types) in &bucket.role_types {
                let slot = role_types.entry(r.clone()).or_default();
                for (t, c) in types {
                    add_count(slot, t, *c);
                }
            }
            member_instances.extend(bucket.members.clone());
        }

        let candidate = CandidateSchema::Event {
            trigger_lemmas: trigger_lemmas.clone(),
            role_counts: role_counts.clone(),
            role_types: role_types.clone(),
        };
        let canonical = candidate.canonical_label();

        if support >= cfg.thresholds.theta
            && coherence >= cfg.thresholds.tau_coherence
            && !role_counts.is_empty()
        {
            let role_names: Vec<String> = role_counts.keys().cloned().collect();
            if evaluator.evaluate_event(&canonical, &role_names)? {
                let mut roles: Vec<EventRole> = role_counts
                    .iter()
                    .map(|(role, count)| EventRole {
                        role_name: role.clone(),
                        type_constraint: majority_type(
                            role_types.get(role).unwrap_or(&BTreeMap::new()),
                        ),
                        required: (*count as f32 / support as f32)
                            >= cfg.thresholds.required_role_ratio,
                    })
                    .collect();
                // every schema carries at least one required role
                if !roles.iter().any(|r| r.required) {
                    if let Some(top) = roles
                        .iter()
                        .map(|r| r.role_name.clone())
                        .zip(roles.iter().map(|r| role_counts[&r.role_name]))
                        .max_by(|(na, ca), (nb, cb)| ca.cmp(cb).then(nb.cmp(na)))
                        .map(|(n, _)| n)
                    {
                        for r in &mut roles {
                            if r.role_name == top {
                                r.required = true;
                            }
                        }
                    }
                }
                out.promoted.push(EventSchema {
                    schema_id: schema_id("evt", &canonical),
                    event_type: canonical.clone(),
                    trigger_lemmas: trigger_lemmas.keys().cloned().collect(),
                    roles,
                    support_count: support,
                    embedding: embedder.embed_one(&canonical)?,
                });
                out.resolved.push(SchemaProposal {
                    candidate,
                    support_count: support,
                    coherence,
                    status: ProposalStatus::Promoted,
                    member_instances,
                });
                continue;
            }
        }
        out.pending.push(SchemaProposal {
            candidate,
            support_count: support,
            coherence,
            status: ProposalStatus::Pending,
            member_instances,
        });
    }
    Ok(out)
}

/// Reified form of one event instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReifiedEvent {
    /// The event node; `None` when the instance aligned to an already
    /// stored event.
    pub node: Option<EntityNode>,
    pub node_id: EntityId,
    pub facts: Vec<FactEdge>,
}

/// Reify a normalized, verified event into uniform graph storage: exactly
/// one event node, one `rdf:type` fact, one `has_<role>` fact per binding,
/// and one `has_time` fact when a time is present.
pub fn relationalize_event(
    event: &EventInstance,
    mkb: &Mkb,
    created_at_batch: u64,
) -> Result<ReifiedEvent, SchemaError> {
    if event.bindings.contains_key("time") {
        return Err(SchemaError::ReservedRoleName);
    }
    if let Some(schema) = mkb.event_schema_for_trigger(&event.trigger_lemma) {
        for role in &schema.roles {
            if role.required && !event.bindings.contains_key(&role.role_name) {
                return Err(SchemaError::MissingRequiredRole {
                    event: event.fingerprint(),
                    role: role.role_name.clone(),
                });
            }
        }
    }

    let bindings: Vec<(String, EntityId)> =
        event.bindings.iter().map(|(r, e)| (r.clone(), e.clone())).collect();
    let time_key = event.time.as_ref().map(|t| t.canonical());
    let node_id = match &event.aligned_to {
        Some(existing) => EntityId::from(existing.as_str()),
        None => EntityId::from(
            mint_event_id(&event.trigger_lemma, &bindings, time_key.as_deref()).as_str(),
        ),
    };
    let node = event.aligned_to.is_none().then(|| EntityNode {
        entity_id: node_id.clone(),
        canonical_name: event.trigger_lemma.clone(),
        entity_type: "Event".to_string(),
        created_at_batch,
    });

    let mut facts = vec![FactEdge::active(
        node_id.clone(),
        "rdf:type",
        TailRef::Literal(event.trigger_lemma.clone()),
        event.evidence.clone(),
        created_at_batch,
    )];
    for (role, filler) in &event.bindings {
        facts.push(FactEdge::active(
            node_id.clone(),
            format!("has_{role}"),
            TailRef::Entity(filler.clone()),
            event.evidence.clone(),
            created_at_batch,
        ));
    }
    if let Some(t) = &event.time {
        facts.push(FactEdge::active(
            node_id.clone(),
            "has_time",
            TailRef::Literal(t.canonical()),
            event.evidence.clone(),
            created_at_batch,
        ));
    }
    Ok(ReifiedEvent { node, node_id, facts })
}

/// Inverse of [`relationalize_event`]: recover (trigger, role bindings,
/// time) from an event node's facts.
pub fn parse_event_node(
    node_id: &EntityId,
    facts: &[&FactEdge],
) -> Option<(String, BTreeMap<String, EntityId>, Option<TimeRef>)> {
    let mut trigger = None;
    let mut bindings = BTreeMap::new();
    let mut time = None;
    for fact in facts {
        if &fact.head != node_id {
            continue;
        }
        if fact.relation == "rdf:type" {
            trigger = Some(fact.tail.value().to_string());
        } else if fact.relation == "has_time" {
            time = TimeRef::parse_canonical(fact.tail.value());
        } else if let Some(role) = fact.relation.strip_prefix("has_") {
            if let TailRef::Entity(id) = &fact.tail {
                bindings.insert(role.to_string(), id.clone());
            }
        }
    }
    trigger.map(|t| (t, bindings, time))
}

/// Refresh entity profiles after a batch: every entity touched by the
/// verified facts gets a profile stamped with this batch, aliases merge in
/// the batch's cluster members, literal attributes overwrite per key with
/// the newest batch winning, and hierarchy verdicts land as typing
/// metadata. The vector index is synchronized by construction.
#[allow(clippy::too_many_arguments)]
pub fn update_entity_profiles(
    new_facts: &[FactEdge],
    nodes: &BTreeMap<EntityId, EntityNode>,
    cluster_aliases: &BTreeMap<EntityId, Vec<String>>,
    hierarchy: &[(EntityId, String)],
    mkb: &mut Mkb,
    embedder: &dyn Embedder,
    batch_index: u64,
) -> Result<(), AdapterError> {
    let mut touched: BTreeSet<EntityId> = BTreeSet::new();
    for fact in new_facts {
        touched.insert(fact.head.clone());
        if let TailRef::Entity(tail) = &fact.tail {
            touched.insert(tail.clone());
        }
    }

    for id in &touched {
        let (name, entity_type) = match nodes.get(id) {
            Some(node) => (node.canonical_name.clone(), node.entity_type.clone()),
            None => match mkb.profile(id) {
                Some(p) => (p.canonical_name.clone(), p.entity_type.clone()),
                None => (id.as_str().to_string(), "Entity".to_string()),
            },
        };
        let mut profile = crate::mkb::EntityProfile::new(
            id.clone(),
            name.clone(),
            entity_type,
            batch_index,
            embedder.embed_one(&name)?,
        );
        if let Some(aliases) = cluster_aliases.get(id) {
            profile.aliases.extend(aliases.iter().cloned());
        }
        for fact in new_facts {
            if &fact.head != id {
                continue;
            }
            match (&fact.relation[..], &fact.tail) {
                ("also_known_as", TailRef::Literal(alias)) => {
                    profile.aliases.insert(alias.clone());
                }
                (relation, TailRef::Literal(value)) => {
                    profile
                        .key_attributes
                        .insert(relation.to_string(), value.clone());
                }
                _ => {}
            }
        }
        mkb.upsert_entity_profile(profile);
    }

    for (child, parent_name) in hierarchy {
        if let Some(existing) = mkb.profile(child).cloned() {
            let mut updated = existing;
            updated.key_attributes.insert("subtype_of".into(), parent_name.clone());
            mkb.upsert_entity_profile(updated);
        }
    }
    Ok(())
}

/// Alias map from this batch's normalization output: entity id → member
/// surface forms of its cluster.
pub fn cluster_alias_map(
    clusters: &[MentionCluster],
    assignments: &[crate::normalize::Assignment],
) -> BTreeMap<EntityId, Vec<String>> {
    clusters
        .iter()
        .zip(assignments)
        .map(|(c, a)| (a.entity_id().clone(), c.members.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::mock::{FixtureEmbedder, MockEmbedder, MockEvaluator};
    use crate::adapters::FixtureTable;
    use crate::graph::Evidence;
    use std::sync::Arc;

    fn evaluator_with(entries: &[(&str, &str)]) -> MockEvaluator {
        let mut t = FixtureTable::new();
        for (k, v) in entries {
            t.insert(*k, *v);
        }
        MockEvaluator::new(Arc::new(t))
    }

    fn triple(head: &str, rel: &str, tail: TailRef) -> ResolvedTriple {
        ResolvedTriple {
            head: EntityId::from(head),
            relation: rel.to_string(),
            tail,
            evidence: vec![Evidence::new("d0", "evidence")],
            confidence: 1.0,
        }
    }

    fn entity_tail(id: &str) -> TailRef {
        TailRef::Entity(EntityId::from(id))
    }

    fn types(pairs: &[(&str, &str)]) -> BTreeMap<EntityId, String> {
        pairs.iter().map(|(id, t)| (EntityId::from(*id), t.to_string())).collect()
    }

    fn cfg() -> PipelineConfig {
        PipelineConfig::default()
    }

    #[test]
    fn theta_boundary_promotes_exactly_at_theta() {
        let cfg = cfg();
        let embedder = MockEmbedder::default();
        let evaluator = evaluator_with(&[]);
        let ty = types(&[("a", "Organization"), ("b", "Organization"), ("c", "Location")]);

        // θ−1 occurrences → pending, nothing promoted
        let two: Vec<ResolvedTriple> = (0..2)
            .map(|i| triple(["a", "b"][i], "located_in", entity_tail("c")))
            .collect();
        let out = induce_relation_schemas(
            &two, &ty, Vec::new(), &Mkb::new(), &embedder, &evaluator, &cfg,
        )
        .unwrap();
        assert!(out.promoted.is_empty());
        assert_eq!(out.pending.len(), 1);
        assert_eq!(out.pending[0].support_count, 2);

        // θ occurrences → exactly one schema
        let three: Vec<ResolvedTriple> = (0..3)
            .map(|i| triple(["a", "b", "a"][i], "located_in", entity_tail("c")))
            .collect();
        let out = induce_relation_schemas(
            &three, &ty, Vec::new(), &Mkb::new(), &embedder, &evaluator, &cfg,
        )
        .unwrap();
        assert_eq!(out.promoted.len(), 1);
        let schema = &out.promoted[0];
        assert_eq!(schema.relation_label, "located_in");
        assert_eq!(schema.support_count, 3);
        assert_eq!(schema.domain_type, "Organization");
        assert_eq!(schema.range_type, "Location");
    }

    #[test]
    fn pending_pool_accumulates_across_batches() {
        let cfg = cfg();
        let embedder = MockEmbedder::default();
        let evaluator = evaluator_with(&[]);
        let ty = types(&[("a", "Organization"), ("c", "Location")]);

        let one = vec![triple("a", "located_in", entity_tail("c"))];
        let first = induce_relation_schemas(
            &one, &ty, Vec::new(), &Mkb::new(), &embedder, &evaluator, &cfg,
        )
        .unwrap();
        assert_eq!(first.pending.len(), 1);

        let second = induce_relation_schemas(
            &one, &ty, first.pending, &Mkb::new(), &embedder, &evaluator, &cfg,
        )
        .unwrap();
        assert_eq!(second.pending[0].support_count, 2);

        let third = induce_relation_schemas(
            &one, &ty, second.pending, &Mkb::new(), &embedder, &evaluator, &cfg,
        )
        .unwrap();
        assert_eq!(third.promoted.len(), 1, "accumulated support reaches θ");
        assert_eq!(third.promoted[0].support_count, 3);
    }

    #[test]
    fn near_duplicate_labels_consolidate_into_one_schema() {
        let cfg = cfg();
        // hand-set embeddings: the two labels are near-duplicates
        let mut embedder = FixtureEmbedder::new(4);
        embedder.set("acquired_by", vec![1.0, 0.0, 0.0, 0.0]);
        embedder.set("acquisition_of", vec![0.9, (1.0f32 - 0.81).sqrt(), 0.0, 0.0]);
        let evaluator = evaluator_with(&[]);
        let ty = types(&[("a", "Organization"), ("b", "Organization")]);

        let triples = vec![
            triple("a", "acquired_by", entity_tail("b")),
            triple("a", "acquired_by", entity_tail("b")),
            triple("b", "acquisition_of", entity_tail("a")),
        ];
        let out = induce_relation_schemas(
            &triples, &ty, Vec::new(), &Mkb::new(), &embedder, &evaluator, &cfg,
        )
        .unwrap();
        assert_eq!(out.promoted.len(), 1, "one cluster, one schema");
        assert_eq!(out.promoted[0].relation_label, "acquired_by", "majority label wins");
        assert_eq!(out.promoted[0].support_count, 3);
    }

    #[test]
    fn incoherent_cluster_stays_pending_despite_support() {
        let cfg = cfg();
        // a single-link chain whose mean pairwise cosine falls below the
        // coherence bar: a~b = b~c = 0.85, a~c ≈ 0.445
        let mut embedder = FixtureEmbedder::new(3);
        let theta = 0.85f32.acos();
        embedder.set("rel_a", vec![1.0, 0.0, 0.0]);
        embedder.set("rel_b", vec![theta.cos(), theta.sin(), 0.0]);
        embedder.set("rel_c", vec![(2.0 * theta).cos(), (2.0 * theta).sin(), 0.0]);
        let evaluator = evaluator_with(&[]);
        let triples = vec![
            triple("a", "rel_a", entity_tail("b")),
            triple("a", "rel_b", entity_tail("b")),
            triple("a", "rel_c", entity_tail("b")),
        ];
        let ty = types(&[("a", "Entity"), ("b", "Entity")]);
        let out = induce_relation_schemas(
            &triples, &ty, Vec::new(), &Mkb::new(), &embedder, &evaluator, &cfg,
        )
        .unwrap();
        assert!(out.promoted.is_empty(), "support reaches θ but coherence fails");
        assert_eq!(out.pending.len(), 1);
        assert!(out.pending[0].coherence < cfg.thresholds.tau_coherence);
    }

    #[test]
    fn every_member_ends_in_exactly_one_bucket() {
        let cfg = cfg();
        let embedder = MockEmbedder::default();
        let evaluator = evaluator_with(&[]);
        let ty = types(&[("a", "Organization"), ("c", "Location")]);
        let triples: Vec<ResolvedTriple> = (0..3)
            .map(|_| triple("a", "located_in", entity_tail("c")))
            .chain((0..2).map(|_| triple("a", "vendor", TailRef::Literal("x".into()))))
            .collect();
        let out = induce_relation_schemas(
            &triples, &ty, Vec::new(), &Mkb::new(), &embedder, &evaluator, &cfg,
        )
        .unwrap();
        let mut seen = 0usize;
        for p in out.resolved.iter().chain(&out.pending) {
            seen += p.member_instances.len();
        }
        assert_eq!(seen, triples.len(), "member instances are conserved across buckets");
        assert_eq!(out.resolved.len(), 1);
        assert_eq!(out.resolved[0].status, ProposalStatus::Promoted);
        assert_eq!(out.resolved[0].member_instances.len(), 3);
    }

    #[test]
    fn hierarchy_verdicts_land_as_profile_metadata() {
        let embedder = MockEmbedder::default();
        let mut mkb = Mkb::new();
        let child = EntityId::from("k8s.b1.x");
        let nodes = BTreeMap::from([(
            child.clone(),
            EntityNode {
                entity_id: child.clone(),
                canonical_name: "K8s".into(),
                entity_type: "Platform".into(),
                created_at_batch: 1,
            },
        )]);
        let facts = vec![FactEdge::active(
            child.clone(),
            "status",
            TailRef::Literal("active".into()),
            vec![Evidence::new("d", "e")],
            1,
        )];
        update_entity_profiles(
            &facts,
            &nodes,
            &BTreeMap::new(),
            &[(child.clone(), "Kubernetes".to_string())],
            &mut mkb,
            &embedder,
            0,
        )
        .unwrap();
        assert_eq!(
            mkb.profile(&child).unwrap().key_attributes.get("subtype_of"),
            Some(&"Kubernetes".to_string())
        );
    }

    #[test]
    fn evaluator_failure_parks_the_proposal() {
        let cfg = cfg();
        let embedder = MockEmbedder::default();
        let evaluator = evaluator_with(&[("evaluate_relation|located_in", "fail")]);
        let ty = types(&[("a", "Organization"), ("c", "Location")]);
        let triples: Vec<ResolvedTriple> =
            (0..3).map(|_| triple("a", "located_in", entity_tail("c"))).collect();
        let out = induce_relation_schemas(
            &triples, &ty, Vec::new(), &Mkb::new(), &embedder, &evaluator, &cfg,
        )
        .unwrap();
        assert!(out.promoted.is_empty());
        assert_eq!(out.pending.len(), 1);
        assert_eq!(out.pending[0].status, ProposalStatus::Pending);
        assert_eq!(out.pending[0].member_instances.len(), 3, "members are never dropped");
    }

    #[test]
    fn symmetric_property_inferred_from_both_orientations() {
        let cfg = cfg();
        let embedder = MockEmbedder::default();
        let evaluator = evaluator_with(&[]);
        let ty = types(&[("a", "Entity"), ("b", "Entity")]);
        let triples = vec![
            triple("a", "partnered_with", entity_tail("b")),
            triple("b", "partnered_with", entity_tail("a")),
            triple("a", "partnered_with", entity_tail("b")),
        ];
        let out = induce_relation_schemas(
            &triples, &ty, Vec::new(), &Mkb::new(), &embedder, &evaluator, &cfg,
        )
        .unwrap();
        assert!(out.promoted[0].properties.contains(&SchemaProperty::Symmetric));
    }

    fn event(lemma: &str, bindings: &[(&str, &str)], time: Option<TimeRef>) -> EventInstance {
        EventInstance {
            trigger_surface: lemma.to_string(),
            trigger_lemma: lemma.to_string(),
            bindings: bindings
                .iter()
                .map(|(r, e)| (r.to_string(), EntityId::from(*e)))
                .collect(),
            time,
            evidence: vec![Evidence::new("d0", format!("{lemma} evidence"))],
            confidence: 1.0,
            aligned_to: None,
        }
    }

    #[test]
    fn event_schema_roles_and_required_ratio() {
        let cfg = cfg();
        let embedder = MockEmbedder::default();
        let evaluator = evaluator_with(&[]);
        let ty = types(&[
            ("acme", "Organization"),
            ("initech", "Organization"),
            ("globex", "Organization"),
            ("umbrella", "Organization"),
            ("stark", "Organization"),
            ("wayne", "Organization"),
            ("bank", "Organization"),
        ]);
        let events = vec![
            event("acquire", &[("acquirer", "acme"), ("acquired", "initech")], None),
            event("acquire", &[("acquirer", "globex"), ("acquired", "umbrella")], None),
            event(
                "acquire",
                &[("acquirer", "stark"), ("acquired", "wayne"), ("advisor", "bank")],
                None,
            ),
        ];
        let out = induce_event_schemas(
            &events, &ty, Vec::new(), &Mkb::new(), &embedder, &evaluator, &cfg,
        )
        .unwrap();
        assert_eq!(out.promoted.len(), 1);
        let schema = &out.promoted[0];
        assert_eq!(schema.event_type, "acquire");
        let role = |n: &str| schema.role(n).unwrap();
        assert!(role("acquirer").required, "3/3 ≥ 0.8");
        assert!(role("acquired").required);
        assert!(!role("advisor").required, "1/3 < 0.8 → included but optional");
        assert_eq!(role("acquirer").type_constraint, "Organization");
    }

    #[test]
    fn single_event_stays_pending() {
        let cfg = cfg();
        let embedder = MockEmbedder::default();
        let evaluator = evaluator_with(&[]);
        let out = induce_event_schemas(
            &[event("launch", &[("launcher", "acme")], None)],
            &BTreeMap::new(),
            Vec::new(),
            &Mkb::new(),
            &embedder,
            &evaluator,
            &cfg,
        )
        .unwrap();
        assert!(out.promoted.is_empty());
        assert_eq!(out.pending.len(), 1);
    }

    #[test]
    fn relationalization_counts_and_roundtrip() {
        let mkb = Mkb::new();
        let e = event(
            "acquire",
            &[("acquirer", "acme"), ("acquired", "initech")],
            Some(TimeRef::year(2021)),
        );
        let reified = relationalize_event(&e, &mkb, 1).unwrap();
        assert!(reified.node.is_some());
        // 1 type + 2 roles + 1 time
        assert_eq!(reified.facts.len(), 4);
        let relations: BTreeSet<&str> =
            reified.facts.iter().map(|f| f.relation.as_str()).collect();
        assert_eq!(
            relations,
            BTreeSet::from(["rdf:type", "has_acquirer", "has_acquired", "has_time"])
        );

        let refs: Vec<&FactEdge> = reified.facts.iter().collect();
        let (trigger, bindings, time) = parse_event_node(&reified.node_id, &refs).unwrap();
        assert_eq!(trigger, e.trigger_lemma);
        assert_eq!(bindings, e.bindings);
        assert_eq!(time, e.time);
    }

    #[test]
    fn relationalization_without_time_counts_type_plus_roles() {
        let e = event("launch", &[("launcher", "acme")], None);
        let reified = relationalize_event(&e, &Mkb::new(), 1).unwrap();
        assert_eq!(reified.facts.len(), 2);
    }

    #[test]
    fn missing_required_role_is_an_error() {
        let cfg = cfg();
        let embedder = MockEmbedder::default();
        let evaluator = evaluator_with(&[]);
        let ty = types(&[("acme", "Organization"), ("initech", "Organization")]);
        let full = vec![
            event("acquire", &[("acquirer", "acme"), ("acquired", "initech")], None),
            event("acquire", &[("acquirer", "acme"), ("acquired", "initech")], Some(TimeRef::year(2020))),
            event("acquire", &[("acquirer", "initech"), ("acquired", "acme")], Some(TimeRef::year(2022))),
        ];
        let induction = induce_event_schemas(
            &full, &ty, Vec::new(), &Mkb::new(), &embedder, &evaluator, &cfg,
        )
        .unwrap();
        let mut mkb = Mkb::new();
        for s in induction.promoted {
            mkb.register_event_schema(s).unwrap();
        }
        let partial = event("acquire", &[("acquirer", "acme")], None);
        let err = relationalize_event(&partial, &mkb, 2).unwrap_err();
        assert!(matches!(err, SchemaError::MissingRequiredRole { .. }));
    }

    #[test]
    fn aligned_events_reuse_the_stored_node() {
        let mut e = event("acquire", &[("acquirer", "acme")], None);
        e.aligned_to = Some(crate::ids::EventId::from("evt.hist"));
        let reified = relationalize_event(&e, &Mkb::new(), 2).unwrap();
        assert!(reified.node.is_none());
        assert_eq!(reified.node_id, EntityId::from("evt.hist"));
    }

    #[test]
    fn event_node_ids_are_distinct_for_distinct_content() {
        let a = relationalize_event(
            &event("acquire", &[("acquirer", "acme")], Some(TimeRef::year(2019))),
            &Mkb::new(),
            1,
        )
        .unwrap();
        let b = relationalize_event(
            &event("acquire", &[("acquirer", "acme")], Some(TimeRef::year(2020))),
            &Mkb::new(),
            1,
        )
        .unwrap();
        assert_ne!(a.node_id, b.node_id);
    }

    #[test]
    fn profile_update_creates_merges_and_stamps() {
        let embedder = MockEmbedder::default();
        let mut mkb = Mkb::new();
        let psp = EntityId::from("psp.b1.x");
        let nodes = BTreeMap::from([(
            psp.clone(),
            EntityNode {
                entity_id: psp.clone(),
                canonical_name: "PodSecurityPolicy".into(),
                entity_type: "ApiResource".into(),
                created_at_batch: 1,
            },
        )]);
        let facts = vec![FactEdge::active(
            psp.clone(),
            "status",
            TailRef::Literal("active".into()),
            vec![Evidence::new("d0", "has status active")],
            1,
        )];
        update_entity_profiles(&facts, &nodes, &BTreeMap::new(), &[], &mut mkb, &embedder, 0)
            .unwrap();
        let p = mkb.profile(&psp).unwrap();
        assert_eq!(p.canonical_name, "PodSecurityPolicy");
        assert_eq!(p.aliases, BTreeSet::from(["PodSecurityPolicy".to_string()]));
        assert_eq!(p.key_attributes.get("status"), Some(&"active".to_string()));
        assert_eq!(p.last_updated_batch, 0);

        // alias facts extend the alias set; newest batch wins attributes
        let facts = vec![
            FactEdge::active(
                psp.clone(),
                "also_known_as",
                TailRef::Literal("PSP".into()),
                vec![Evidence::new("d1", "aka")],
                2,
            ),
            FactEdge::active(
                psp.clone(),
                "status",
                TailRef::Literal("deprecated".into()),
                vec![Evidence::new("d1", "now deprecated")],
                2,
            ),
        ];
        update_entity_profiles(&facts, &nodes, &BTreeMap::new(), &[], &mut mkb, &embedder, 1)
            .unwrap();
        let p = mkb.profile(&psp).unwrap();
        assert!(p.aliases.contains("PSP"));
        assert!(p.aliases.contains("PodSecurityPolicy"), "aliases never shrink");
        assert_eq!(p.key_attributes.get("status"), Some(&"deprecated".to_string()));
        assert_eq!(p.last_updated_batch, 1);

        // untouched entity keeps its stamp
        let other = EntityId::from("other.b1.y");
        let mut other_profile = crate::mkb::EntityProfile::new(
            other.clone(),
            "Other",
            "Entity",
            0,
            embedder.embed_one("Other").unwrap(),
        );
        other_profile.last_updated_batch = 0;
        mkb.upsert_entity_profile(other_profile);
        update_entity_profiles(&[], &nodes, &BTreeMap::new(), &[], &mut mkb, &embedder, 5)
            .unwrap();
        assert_eq!(mkb.profile(&other).unwrap().last_updated_batch, 0);
    }
}
