//! The per-batch update loop and the stream driver.
//!
//! `process_batch` runs extraction → normalization → governance → schema
//! evolution → transactional integration against an immutable prior state
//! and returns the next state plus an audit report. Any fatal stage error
//! aborts the whole batch: the returned error carries the report, and the
//! caller's state is untouched (the MKB is staged on a copy, the graph
//! store applies all-or-nothing).
//!
//! `run_stream` threads state through an ordered list of window files,
//! persisting snapshots between windows, and always writes the report —
//! aborted batches included.

pub mod metrics;
pub mod report;

pub use report::BatchReport;

use crate::adapters::{AdapterError, Backends};
use crate::config::{ConfigError, PipelineConfig};
use crate::extract::{
    self, Document, EventInstance, ResolvedTriple, TailCandidate,
};
use crate::govern::{self, Intent, LogicContext};
use crate::graph::{
    EntityNode, Evidence, FactEdge, FaultPoint, GraphError, GraphState, KnowledgeIncrement,
    TailRef,
};
use crate::ids::{EntityId, EventId};
use crate::mkb::{normalize_relation_label, CandidateSchema, IndexedEvent, Mkb, MkbError};
use crate::normalize::{self, Assignment};
use crate::par;
use crate::schema::{self, SchemaError};
use report::{ConflictRecord, PendingCandidate, PromotedSchemaSummary, RejectedCandidate};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid batch file: {0}")]
    BadBatch(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Mkb(#[from] MkbError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Metric(#[from] metrics::MetricError),
}

/// A batch abort: the error plus the report describing how far the batch
/// got. State is unchanged.
#[derive(Debug)]
pub struct AbortedBatch {
    pub error: PipelineError,
    pub report: BatchReport,
}

/// One loaded input window.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub window: u64,
    pub docs: Vec<Document>,
}

/// Parse and validate a line-delimited batch file: unique doc ids, a single
/// window index, optional RFC 3339 timestamps.
pub fn parse_batch(text: &str) -> Result<Batch, PipelineError> {
    let mut docs: Vec<Document> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| {
            PipelineError::BadBatch(format!("line {}: {e}", lineno + 1))
        })?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(PipelineError::BadBatch(format!("duplicate doc_id {}", doc.doc_id)));
        }
        if let Some(ts) = &doc.timestamp {
            chrono::DateTime::parse_from_rfc3339(ts).map_err(|e| {
                PipelineError::BadBatch(format!("doc {}: bad timestamp: {e}", doc.doc_id))
            })?;
        }
        docs.push(doc);
    }
    let window = docs.first().map(|d| d.window).unwrap_or(0);
    if docs.iter().any(|d| d.window != window) {
        return Err(PipelineError::BadBatch("documents span multiple windows".into()));
    }
    Ok(Batch { window, docs })
}

pub fn load_batch_file(path: &Path) -> Result<Batch, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_batch(&text)
}

/// Everything a successful batch produces.
#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub graph: GraphState,
    pub mkb: Mkb,
    pub report: BatchReport,
}

/// Run one batch against the prior state.
pub fn process_batch(
    batch: &Batch,
    graph: &GraphState,
    mkb: &Mkb,
    cfg: &PipelineConfig,
    backends: &Backends,
    fault: Option<FaultPoint>,
) -> Result<BatchOutcome, Box<AbortedBatch>> {
    let mut report = BatchReport::new(batch.window);
    match run_stages(batch, graph, mkb, cfg, backends, fault, &mut report) {
        Ok((next_graph, next_mkb)) => {
            Ok(BatchOutcome { graph: next_graph, mkb: next_mkb, report })
        }
        Err(error) => {
            report.abort = Some(error.to_string());
            Err(Box::new(AbortedBatch { error, report }))
        }
    }
}

/// Candidate collections after normalization, in canonical order.
struct NormalizedBatch {
    triples: Vec<ResolvedTriple>,
    events: Vec<EventInstance>,
    entity_types: BTreeMap<EntityId, String>,
    clusters: Vec<normalize::MentionCluster>,
    assignments: Vec<Assignment>,
    /// (child entity, parent canonical mention) typing edges.
    hierarchy: Vec<(EntityId, String)>,
    merge_conflicts: Vec<crate::normalize::events::MergeConflict>,
}

fn run_stages(
    batch: &Batch,
    graph: &GraphState,
    mkb: &Mkb,
    cfg: &PipelineConfig,
    backends: &Backends,
    fault: Option<FaultPoint>,
    report: &mut BatchReport,
) -> Result<(GraphState, Mkb), PipelineError> {
    if batch.window != graph.batch_index {
        return Err(PipelineError::BadBatch(format!(
            "window {} does not follow graph state at {} applied batches",
            batch.window, graph.batch_index
        )));
    }
    let window = batch.window;
    let increment_index = graph.batch_index + 1;

    // ---- stage 1: dual-track extraction -------------------------------
    let t0 = Instant::now();
    let ctx = extract::build_context(
        &batch.docs,
        window,
        mkb,
        backends.embedder.as_ref(),
        cfg.thresholds.retrieval_k,
    )?;
    report.context_schemas = ctx.schemas.len();
    let extraction = extract::extract_batch(
        &batch.docs,
        &ctx,
        backends.extractor.as_ref(),
        cfg.ablation.disable_events,
    );
    report.skipped_docs = extraction.skipped_docs.clone();
    report.timings_us.insert("extract".into(), t0.elapsed().as_micros());

    // ---- stage 1b: normalization --------------------------------------
    let t0 = Instant::now();
    let normalized = normalize_batch(&extraction, mkb, cfg, backends, window, increment_index)?;
    for (assignment, cluster) in normalized.assignments.iter().zip(&normalized.clusters) {
        let _ = cluster;
        match assignment {
            Assignment::Created(id) => report.entities_created.push(id.clone()),
            Assignment::Reused(id) => report.entities_reused.push(id.clone()),
        }
    }
    for conflict in &normalized.merge_conflicts {
        report.conflicts.push(ConflictRecord {
            kind: "event_merge_role_conflict".into(),
            edge_id: None,
            detail: format!(
                "{} vs {} on role {}",
                conflict.first, conflict.second, conflict.role
            ),
        });
    }
    report.timings_us.insert("normalize".into(), t0.elapsed().as_micros());

    // ---- stage 2: governance ------------------------------------------
    let t0 = Instant::now();
    let governed = govern_batch(&normalized, graph, mkb, cfg, backends, window, report)?;
    report.timings_us.insert("govern".into(), t0.elapsed().as_micros());

    // ---- stage 3: schema evolution on a staged MKB ---------------------
    let t0 = Instant::now();
    let mut next_mkb = mkb.clone();
    let (reified, mut extra_nodes, mut new_facts) = evolve_schemas(
        &governed,
        &normalized,
        &mut next_mkb,
        cfg,
        backends,
        increment_index,
        report,
    )?;
    report.timings_us.insert("schema".into(), t0.elapsed().as_micros());

    // ---- stage 4: increment assembly + transactional integration -------
    let t0 = Instant::now();
    let mut new_entities: Vec<EntityNode> = Vec::new();
    for (cluster, assignment) in normalized.clusters.iter().zip(&normalized.assignments) {
        if let Assignment::Created(id) = assignment {
            new_entities.push(EntityNode {
                entity_id: id.clone(),
                canonical_name: cluster.canonical_mention.clone(),
                entity_type: cluster.inferred_type.clone(),
                created_at_batch: increment_index,
            });
        }
    }
    new_entities.append(&mut extra_nodes);
    new_entities.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));
    new_entities.dedup_by(|a, b| a.entity_id == b.entity_id);

    // merge duplicate edge ids, pooling evidence in encounter order
    let mut merged_facts: BTreeMap<crate::ids::EdgeId, FactEdge> = BTreeMap::new();
    for fact in new_facts.drain(..) {
        match merged_facts.get_mut(&fact.edge_id) {
            None => {
                merged_facts.insert(fact.edge_id.clone(), fact);
            }
            Some(existing) => {
                for ev in fact.evidence {
                    if !existing.evidence.contains(&ev) {
                        existing.evidence.push(ev);
                    }
                }
            }
        }
    }

    let mut deprecations: BTreeMap<crate::ids::EdgeId, Evidence> = BTreeMap::new();
    for (id, ev) in governed.deprecation_targets {
        deprecations.entry(id).or_insert(ev);
    }
    // An assertion of an edge this same batch retires is surfaced as a
    // conflict and dropped; the evidence-backed retirement wins.
    for id in deprecations.keys() {
        if let Some(dropped) = merged_facts.remove(id) {
            report.conflicts.push(ConflictRecord {
                kind: "same_batch_assert_and_retire".into(),
                edge_id: Some(id.clone()),
                detail: format!("candidate {} dropped in favour of retirement", dropped.edge_id),
            });
        }
    }

    let increment = KnowledgeIncrement {
        batch_index: increment_index,
        new_entities,
        new_facts: merged_facts.into_values().collect(),
        deprecations: deprecations.into_iter().collect(),
    };

    // stage 3 profile refresh needs the post-batch node view; facts that
    // would resurrect a deprecated edge stay out of the profiles just as
    // they stay out of the graph
    let mut node_view: BTreeMap<EntityId, EntityNode> =
        graph.entities.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    for node in &increment.new_entities {
        node_view.insert(node.entity_id.clone(), node.clone());
    }
    let profile_facts: Vec<FactEdge> = increment
        .new_facts
        .iter()
        .filter(|f| graph.edge(&f.edge_id).is_none_or(|e| e.is_active()))
        .cloned()
        .collect();
    schema::update_entity_profiles(
        &profile_facts,
        &node_view,
        &schema::cluster_alias_map(&normalized.clusters, &normalized.assignments),
        &normalized.hierarchy,
        &mut next_mkb,
        backends.embedder.as_ref(),
        window,
    )?;
    for r in &reified {
        if r.node.is_some() {
            let event = &governed.informational[r.source_index];
            next_mkb.register_event(IndexedEvent {
                event_id: EventId::from(r.node_id.as_str()),
                trigger_lemma: event.trigger_lemma.clone(),
                embedding: backends.embedder.embed_one(&event.trigger_lemma)?,
                roles: event.bindings.clone(),
                time: event.time.clone(),
            });
        }
    }

    let mut next_graph = graph.clone();
    let outcome = next_graph.apply_increment_with_fault(&increment, fault)?;

    report.additions = outcome.created.clone();
    report.reasserted = outcome.merged.clone();
    report.deprecations = increment
        .deprecations
        .iter()
        .filter(|(id, _)| outcome.deprecated.contains(id))
        .cloned()
        .collect();
    for id in &outcome.resurrection_conflicts {
        report.conflicts.push(ConflictRecord {
            kind: "resurrection".into(),
            edge_id: Some(id.clone()),
            detail: "re-assertion of a deprecated fact; not resurrected".into(),
        });
    }
    report.proposals_pending = next_mkb.pending_proposal_count();
    report.timings_us.insert("integrate".into(), t0.elapsed().as_micros());
    report
        .check_invariants()
        .map_err(PipelineError::BadBatch)?;

    Ok((next_graph, next_mkb))
}

/// Collect mentions, run two-level entity normalization, resolve candidate
/// spans to canonical ids, then normalize events.
fn normalize_batch(
    extraction: &extract::BatchExtraction,
    mkb: &Mkb,
    cfg: &PipelineConfig,
    backends: &Backends,
    window: u64,
    increment_index: u64,
) -> Result<NormalizedBatch, PipelineError> {
    let mut mentions: Vec<String> = Vec::new();
    for t in &extraction.triples {
        mentions.push(t.head.text.clone());
        if let TailCandidate::Mention(m) = &t.tail {
            mentions.push(m.text.clone());
        }
    }
    for e in &extraction.events {
        for (_, m) in &e.role_bindings {
            mentions.push(m.text.clone());
        }
    }

    let skip_cross = cfg.ablation.disable_cross_batch_coref;
    let (intra, assignments) = normalize::normalize_entities(
        &mentions,
        mkb,
        backends.embedder.as_ref(),
        backends.typer.as_ref(),
        backends.adjudicator.as_ref(),
        cfg.thresholds.tau_cluster,
        cfg.thresholds.entity_match_candidates,
        increment_index,
        skip_cross || window == 0,
    )?;

    let mut by_mention: BTreeMap<String, EntityId> = BTreeMap::new();
    let mut entity_types: BTreeMap<EntityId, String> = BTreeMap::new();
    for (cluster, assignment) in intra.clusters.iter().zip(&assignments) {
        let id = assignment.entity_id().clone();
        for member in &cluster.members {
            by_mention.insert(member.clone(), id.clone());
        }
        entity_types.insert(id, cluster.inferred_type.clone());
    }

    let resolve = |text: &str| -> EntityId {
        by_mention.get(text).cloned().expect("every candidate mention was normalized")
    };

    let triples: Vec<ResolvedTriple> = extraction
        .triples
        .iter()
        .map(|t| ResolvedTriple {
            head: resolve(&t.head.text),
            relation: normalize_relation_label(&t.relation),
            tail: match &t.tail {
                TailCandidate::Mention(m) => TailRef::Entity(resolve(&m.text)),
                TailCandidate::Literal(l) => TailRef::Literal(l.clone()),
            },
            evidence: vec![t.evidence.clone()],
            confidence: t.confidence,
        })
        .collect();

    let instances: Vec<EventInstance> = extraction
        .events
        .iter()
        .map(|e| EventInstance {
            trigger_surface: e.trigger_surface.clone(),
            trigger_lemma: e.trigger_lemma.clone(),
            bindings: e
                .role_bindings
                .iter()
                .map(|(role, m)| (role.clone(), resolve(&m.text)))
                .collect(),
            time: e.time.clone(),
            evidence: vec![e.evidence.clone()],
            confidence: e.confidence,
            aligned_to: None,
        })
        .collect();

    let event_outcome = normalize::events::normalize_events(
        instances,
        mkb,
        backends.embedder.as_ref(),
        &cfg.event_match_weights,
        cfg.thresholds.event_align_threshold,
        window,
        skip_cross,
    )?;

    let hierarchy: Vec<(EntityId, String)> = intra
        .hierarchy_edges
        .iter()
        .filter_map(|(child, parent)| {
            by_mention.get(child).map(|id| (id.clone(), parent.clone()))
        })
        .collect();

    Ok(NormalizedBatch {
        triples,
        events: event_outcome.events,
        entity_types,
        clusters: intra.clusters,
        assignments,
        hierarchy,
        merge_conflicts: event_outcome.conflicts,
    })
}

/// Governance output: what survived, split by destiny.
struct GovernedBatch {
    verified_triples: Vec<ResolvedTriple>,
    /// All verified events (any intent) — the schema-induction input.
    verified_events: Vec<EventInstance>,
    /// Verified events with informational intent — the reification input.
    informational: Vec<EventInstance>,
    /// Facts contributed by evolutionary events.
    evolution_facts: Vec<FactEdge>,
    deprecation_targets: Vec<(crate::ids::EdgeId, Evidence)>,
}

fn govern_batch(
    normalized: &NormalizedBatch,
    graph: &GraphState,
    mkb: &Mkb,
    cfg: &PipelineConfig,
    backends: &Backends,
    window: u64,
    report: &mut BatchReport,
) -> Result<GovernedBatch, PipelineError> {
    let judge = backends.judge.as_ref();

    // Evidence verification runs per candidate, independently (parallel);
    // a judge outage parks the candidate instead of accepting it.
    enum EvidenceOutcome {
        Accepted,
        Rejected(String),
        Parked(String),
    }
    let check = |fingerprint: String, summary: String, evidence: String| match govern::verify_evidence(
        &fingerprint,
        &summary,
        &evidence,
        judge,
    ) {
        Ok(v) if v.is_accepted() => EvidenceOutcome::Accepted,
        Ok(v) => EvidenceOutcome::Rejected(v.rationale),
        Err(e) => EvidenceOutcome::Parked(e.to_string()),
    };

    let triple_evidence: Vec<EvidenceOutcome> = par::map_slice(&normalized.triples, |t| {
        check(
            t.fingerprint(),
            format!("({}, {}, {})", t.head.as_str(), t.relation, t.tail.value()),
            t.evidence.first().map(|e| e.span.clone()).unwrap_or_default(),
        )
    });
    let event_evidence: Vec<EvidenceOutcome> = par::map_slice(&normalized.events, |e| {
        check(
            e.fingerprint(),
            e.fingerprint(),
            e.evidence.first().map(|ev| ev.span.clone()).unwrap_or_default(),
        )
    });

    let ctx = LogicContext {
        cfg,
        mkb,
        graph,
        entity_types: &normalized.entity_types,
        batch_index: window,
    };

    // Logical verification is sequential in canonical candidate order so
    // that in-batch inverse conflicts resolve deterministically.
    let mut verified_triples: Vec<ResolvedTriple> = Vec::new();
    for (t, evidence_outcome) in normalized.triples.iter().zip(triple_evidence) {
        match evidence_outcome {
            EvidenceOutcome::Parked(reason) => {
                report
                    .pending
                    .push(PendingCandidate { fingerprint: t.fingerprint(), reason });
                continue;
            }
            EvidenceOutcome::Rejected(reason) => {
                report.rejected.push(RejectedCandidate {
                    fingerprint: t.fingerprint(),
                    stage: "evidence".into(),
                    reason,
                });
                continue;
            }
            EvidenceOutcome::Accepted => {}
        }
        let outcome = govern::verify_logic_triple(t, &ctx, &verified_triples);
        if outcome.verdict.is_accepted() {
            verified_triples.push(t.clone());
        } else {
            report.rejected.push(RejectedCandidate {
                fingerprint: t.fingerprint(),
                stage: "logic".into(),
                reason: outcome.verdict.rationale,
            });
        }
    }

    let mut verified_events: Vec<EventInstance> = Vec::new();
    for (e, evidence_outcome) in normalized.events.iter().zip(event_evidence) {
        match evidence_outcome {
            EvidenceOutcome::Parked(reason) => {
                report
                    .pending
                    .push(PendingCandidate { fingerprint: e.fingerprint(), reason });
                continue;
            }
            EvidenceOutcome::Rejected(reason) => {
                report.rejected.push(RejectedCandidate {
                    fingerprint: e.fingerprint(),
                    stage: "evidence".into(),
                    reason,
                });
                continue;
            }
            EvidenceOutcome::Accepted => {}
        }
        let outcome = govern::verify_logic_event(e, &ctx);
        if outcome.verdict.is_accepted() {
            verified_events.push(e.clone());
        } else {
            report.rejected.push(RejectedCandidate {
                fingerprint: e.fingerprint(),
                stage: "logic".into(),
                reason: outcome.verdict.rationale,
            });
        }
    }

    // Intent classification applies only to events that passed both
    // previous checks. With intent ablated every event is informational
    // and nothing is ever deprecated.
    let mut informational: Vec<EventInstance> = Vec::new();
    let mut evolution_facts: Vec<FactEdge> = Vec::new();
    let mut deprecation_targets: Vec<(crate::ids::EdgeId, Evidence)> = Vec::new();
    let increment_index = graph.batch_index + 1;
    for event in &verified_events {
        let label = if cfg.ablation.disable_intent {
            govern::IntentLabel {
                intent: Intent::Informational,
                triggers_matched: Vec::new(),
                targeted_entity_ids: Vec::new(),
                judge_fallback: false,
            }
        } else {
            govern::classify_intent(event, judge, cfg)
        };
        match label.intent {
            Intent::Informational => informational.push(event.clone()),
            Intent::Evolutionary => {
                let effects = govern::evolution_effects(
                    event,
                    &label,
                    graph,
                    backends.embedder.as_ref(),
                    cfg,
                )?;
                let evidence = event.evidence.clone();
                for (subject, relation, value) in effects.transition_facts {
                    evolution_facts.push(FactEdge::active(
                        subject,
                        normalize_relation_label(&relation),
                        TailRef::Literal(value),
                        evidence.clone(),
                        increment_index,
                    ));
                }
                for (successor, relation, subject) in effects.successor_facts {
                    evolution_facts.push(FactEdge::active(
                        successor,
                        normalize_relation_label(&relation),
                        TailRef::Entity(subject),
                        evidence.clone(),
                        increment_index,
                    ));
                }
                deprecation_targets.extend(effects.targets);
            }
        }
    }

    Ok(GovernedBatch {
        verified_triples,
        verified_events,
        informational,
        evolution_facts,
        deprecation_targets,
    })
}

/// The increment material stage 3 produces: reified events, the event
/// nodes among them, and every fact the increment will carry.
type EvolvedSchemas = (Vec<ReifiedWithSource>, Vec<EntityNode>, Vec<FactEdge>);

/// A reified event plus the index of its source informational event.
struct ReifiedWithSource {
    node: Option<EntityNode>,
    node_id: EntityId,
    source_index: usize,
}

/// Induce schemas, register promotions, reify informational events, and
/// return the new nodes/facts the increment will carry.
fn evolve_schemas(
    governed: &GovernedBatch,
    normalized: &NormalizedBatch,
    next_mkb: &mut Mkb,
    cfg: &PipelineConfig,
    backends: &Backends,
    increment_index: u64,
    report: &mut BatchReport,
) -> Result<EvolvedSchemas, PipelineError> {
    // split the drained pool by proposal kind
    let (pending_relations, pending_events): (Vec<_>, Vec<_>) = next_mkb
        .drain_pending_proposals()
        .into_iter()
        .partition(|p| matches!(p.candidate, CandidateSchema::Relation { .. }));

    let relation_induction = schema::induce_relation_schemas(
        &governed.verified_triples,
        &normalized.entity_types,
        pending_relations,
        next_mkb,
        backends.embedder.as_ref(),
        backends.evaluator.as_ref(),
        cfg,
    )?;
    for s in relation_induction.promoted {
        report.schemas_promoted.push(PromotedSchemaSummary {
            schema_id: s.schema_id.clone(),
            kind: "relation".into(),
            label: s.relation_label.clone(),
            support: s.support_count,
        });
        next_mkb.register_relation_schema(s)?;
    }
    for (label, by) in relation_induction.merged_into_promoted {
        next_mkb.bump_relation_support(&label, by);
    }
    for p in relation_induction.resolved.into_iter().chain(relation_induction.pending) {
        next_mkb.stash_proposal(p);
    }

    let event_induction = schema::induce_event_schemas(
        &governed.verified_events,
        &normalized.entity_types,
        pending_events,
        next_mkb,
        backends.embedder.as_ref(),
        backends.evaluator.as_ref(),
        cfg,
    )?;
    for s in event_induction.promoted {
        report.schemas_promoted.push(PromotedSchemaSummary {
            schema_id: s.schema_id.clone(),
            kind: "event".into(),
            label: s.event_type.clone(),
            support: s.support_count,
        });
        next_mkb.register_event_schema(s)?;
    }
    for (label, by) in event_induction.merged_into_promoted {
        next_mkb.bump_event_support(&label, by);
    }
    for p in event_induction.resolved.into_iter().chain(event_induction.pending) {
        next_mkb.stash_proposal(p);
    }

    // reify informational events for uniform storage
    let mut reified: Vec<ReifiedWithSource> = Vec::new();
    let mut nodes: Vec<EntityNode> = Vec::new();
    let mut facts: Vec<FactEdge> = governed.verified_triples.iter().map(|t| {
        FactEdge::active(
            t.head.clone(),
            t.relation.clone(),
            t.tail.clone(),
            t.evidence.clone(),
            increment_index,
        )
    }).collect();
    facts.extend(governed.evolution_facts.iter().cloned());

    for (i, event) in governed.informational.iter().enumerate() {
        match schema::relationalize_event(event, next_mkb, increment_index) {
            Ok(r) => {
                if let Some(node) = &r.node {
                    nodes.push(node.clone());
                }
                facts.extend(r.facts.iter().cloned());
                reified.push(ReifiedWithSource {
                    node: r.node,
                    node_id: r.node_id,
                    source_index: i,
                });
            }
            Err(e) => report.rejected.push(RejectedCandidate {
                fingerprint: event.fingerprint(),
                stage: "relationalize".into(),
                reason: e.to_string(),
            }),
        }
    }

    Ok((reified, nodes, facts))
}

/// File layout of a persisted pipeline state.
#[derive(Debug, Clone)]
pub struct StateDir {
    pub root: PathBuf,
}

impl StateDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn graph_path(&self) -> PathBuf {
        self.root.join("graph.snap")
    }

    pub fn mkb_path(&self) -> PathBuf {
        self.root.join("mkb.snap")
    }

    pub fn report_path(&self, window: u64) -> PathBuf {
        self.root.join(format!("report_{window}.json"))
    }

    pub fn graph_export_path(&self) -> PathBuf {
        self.root.join("graph_export.jsonl")
    }

    pub fn mkb_export_path(&self) -> PathBuf {
        self.root.join("mkb_export.txt")
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
        std::fs::create_dir_all(&self.root).map_err(|source| PipelineError::Io {
            path: self.root.clone(),
            source,
        })?;
        std::fs::write(path, bytes).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(&self) -> Result<(GraphState, Mkb), PipelineError> {
        let graph = match std::fs::read(self.graph_path()) {
            Ok(bytes) => crate::graph::restore(&bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => GraphState::new(),
            Err(source) => {
                return Err(PipelineError::Io { path: self.graph_path(), source })
            }
        };
        let mkb = match std::fs::read(self.mkb_path()) {
            Ok(bytes) => Mkb::restore(&bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Mkb::new(),
            Err(source) => return Err(PipelineError::Io { path: self.mkb_path(), source }),
        };
        Ok((graph, mkb))
    }

    pub fn save(&self, graph: &GraphState, mkb: &Mkb) -> Result<(), PipelineError> {
        self.write(&self.graph_path(), &graph.snapshot())?;
        self.write(&self.mkb_path(), &mkb.snapshot())
    }

    pub fn write_report(&self, report: &BatchReport) -> Result<(), PipelineError> {
        self.write(&self.report_path(report.batch_index), report.to_json().as_bytes())
    }

    pub fn write_exports(&self, graph: &GraphState, mkb: &Mkb) -> Result<(), PipelineError> {
        self.write(&self.graph_export_path(), &graph.export())?;
        self.write(&self.mkb_export_path(), &mkb.snapshot())
    }
}

/// Run an ordered list of window files, persisting state snapshots between
/// windows. The report is written even when a batch aborts; aborting stops
/// the stream and leaves the persisted state at the last good batch.
pub fn run_stream(
    windows: &[PathBuf],
    state_dir: &StateDir,
    cfg: &PipelineConfig,
    backends: &Backends,
) -> Result<Vec<BatchReport>, Box<AbortedBatch>> {
    let into_abort = |error: PipelineError, window: u64| {
        let mut report = BatchReport::new(window);
        report.abort = Some(error.to_string());
        Box::new(AbortedBatch { error, report })
    };

    let mut reports = Vec::new();
    for path in windows {
        // reload from the persisted snapshots so the stream path exercises
        // restore on every hop
        let (graph, mkb) = state_dir.load().map_err(|e| into_abort(e, 0))?;
        let batch = load_batch_file(path).map_err(|e| into_abort(e, graph.batch_index))?;
        match process_batch(&batch, &graph, &mkb, cfg, backends, None) {
            Ok(outcome) => {
                state_dir
                    .write_report(&outcome.report)
                    .map_err(|e| into_abort(e, batch.window))?;
                state_dir
                    .save(&outcome.graph, &outcome.mkb)
                    .map_err(|e| into_abort(e, batch.window))?;
                if path == windows.last().unwrap() {
                    state_dir
                        .write_exports(&outcome.graph, &outcome.mkb)
                        .map_err(|e| into_abort(e, batch.window))?;
                }
                reports.push(outcome.report);
            }
            Err(aborted) => {
                let _ = state_dir.write_report(&aborted.report);
                return Err(aborted);
            }
        }
    }
    Ok(reports)
}

/// Full visible history of one entity, for inspection.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EntityHistory {
    pub node: EntityNode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<crate::mkb::EntityProfile>,
    pub active: Vec<FactEdge>,
    pub deprecated: Vec<FactEdge>,
    pub deprecation_log: Vec<crate::graph::DeprecationRecord>,
}

/// Look up an entity by id, canonical name, or alias.
pub fn inspect_entity(graph: &GraphState, mkb: &Mkb, query: &str) -> Option<EntityHistory> {
    let id = if graph.entities.contains_key(&EntityId::from(query)) {
        EntityId::from(query)
    } else {
        let by_alias = mkb.lookup_alias(query);
        let profile = by_alias.first()?;
        profile.entity_id.clone()
    };
    let node = graph.entity(&id)?.clone();
    let incident = graph.incident_edges(&id);
    let (active, deprecated): (Vec<_>, Vec<_>) =
        incident.into_iter().cloned().partition(|e| e.is_active());
    let log = graph
        .deprecation_log
        .iter()
        .filter(|rec| {
            graph
                .edge(&rec.edge_id)
                .is_some_and(|e| e.head == id || e.tail.as_entity() == Some(&id))
        })
        .cloned()
        .collect();
    Some(EntityHistory {
        node,
        profile: mkb.profile(&id).cloned(),
        active,
        deprecated,
        deprecation_log: log,
    })
}
