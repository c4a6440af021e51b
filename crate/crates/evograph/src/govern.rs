//! Stage 2: governance adjudication.
//!
//! Three checks run in order. Evidence verification asks a judge whether
//! the supporting text directly contradicts the candidate — and only then
//! rejects; unsupported-but-uncontradicted candidates pass. Logical
//! verification applies general consistency (irreflexivity, anti-symmetric
//! inverse pairs) plus, once schemas exist, domain/range and role-type
//! constraints; candidates with no matching schema bypass the schema check
//! and are routed to induction instead. Intent classification finally
//! splits events into informational ones (which become facts) and
//! evolutionary ones (which retire facts).

use crate::adapters::{AdapterError, Embedder};
use crate::config::PipelineConfig;
use crate::extract::{grammar, EventInstance, ResolvedTriple};
use crate::graph::{Evidence, GraphState, TailRef};
use crate::ids::{EdgeId, EntityId};
use crate::mkb::{Mkb, SchemaProperty};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Role name whose filler is the entity undergoing a state transition.
const SUBJECT_ROLE: &str = "subject";
/// Role names whose filler supersedes the subject.
const SUCCESSOR_ROLES: &[&str] = &["replacement", "successor"];
/// The property an evolutionary trigger transitions.
const TRANSITION_PROPERTY: &str = "status";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonCode {
    EvidenceContradiction,
    IrreflexiveViolation,
    InverseConflict,
    DomainTypeViolation,
    RangeTypeViolation,
    RoleTypeViolation,
    MissingRequiredRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason_code: Option<ReasonCode>,
    pub rationale: String,
}

impl Verdict {
    pub fn accepted(rationale: impl Into<String>) -> Self {
        Self { decision: Decision::Accepted, reason_code: None, rationale: rationale.into() }
    }

    pub fn rejected(reason: ReasonCode, rationale: impl Into<String>) -> Self {
        Self {
            decision: Decision::Rejected,
            reason_code: Some(reason),
            rationale: rationale.into(),
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.decision == Decision::Accepted
    }
}

/// What the evidence judge reports for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceJudgment {
    pub contradicted: bool,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentJudgment {
    Informational,
    Evolutionary,
}

/// The judge backend: strictly text-grounded, no external knowledge.
pub trait Judge: Send + Sync {
    fn judge_evidence(
        &self,
        fingerprint: &str,
        candidate_summary: &str,
        evidence: &str,
    ) -> Result<EvidenceJudgment, AdapterError>;

    fn judge_intent(
        &self,
        fingerprint: &str,
        event_summary: &str,
        evidence: &str,
    ) -> Result<IntentJudgment, AdapterError>;
}

/// Evidence verification: rejected only on direct contradiction.
pub fn verify_evidence(
    fingerprint: &str,
    candidate_summary: &str,
    evidence_text: &str,
    judge: &dyn Judge,
) -> Result<Verdict, AdapterError> {
    let judgment = judge.judge_evidence(fingerprint, candidate_summary, evidence_text)?;
    if judgment.contradicted {
        Ok(Verdict::rejected(ReasonCode::EvidenceContradiction, judgment.rationale))
    } else {
        Ok(Verdict::accepted(judgment.rationale))
    }
}

/// Shared inputs for logical verification.
pub struct LogicContext<'a> {
    pub cfg: &'a PipelineConfig,
    pub mkb: &'a Mkb,
    pub graph: &'a GraphState,
    /// Canonical entity id → inferred type for this batch (falls back to
    /// the stored node type).
    pub entity_types: &'a BTreeMap<EntityId, String>,
    pub batch_index: u64,
}

impl LogicContext<'_> {
    fn type_of(&self, id: &EntityId) -> String {
        if let Some(t) = self.entity_types.get(id) {
            return t.clone();
        }
        self.graph.entity(id).map_or_else(|| "Entity".to_string(), |n| n.entity_type.clone())
    }

    fn is_irreflexive(&self, relation: &str) -> bool {
        self.cfg.is_irreflexive(relation)
            || self
                .mkb
                .relation_schema_by_label(relation)
                .is_some_and(|s| s.properties.contains(&SchemaProperty::Irreflexive))
    }

    fn is_anti_symmetric(&self, relation: &str) -> bool {
        self.cfg.is_anti_symmetric(relation)
            || self
                .mkb
                .relation_schema_by_label(relation)
                .is_some_and(|s| s.properties.contains(&SchemaProperty::AntiSymmetric))
    }
}

fn type_satisfies(entity_type: &str, constraint: &str) -> bool {
    constraint == "Entity" || entity_type == constraint
}

/// Verdict plus whether a promoted schema covered the candidate; uncovered
/// candidates are routed to schema induction.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicOutcome {
    pub verdict: Verdict,
    pub schema_matched: bool,
}

/// Logical verification for a triple. `accepted_so_far` carries the
/// already-accepted triples of this batch so contradictory inverse pairs
/// inside one batch are caught deterministically (first one wins).
pub fn verify_logic_triple(
    triple: &ResolvedTriple,
    ctx: &LogicContext<'_>,
    accepted_so_far: &[ResolvedTriple],
) -> LogicOutcome {
    if ctx.is_irreflexive(&triple.relation) {
        if let TailRef::Entity(tail) = &triple.tail {
            if tail == &triple.head {
                return LogicOutcome {
                    verdict: Verdict::rejected(
                        ReasonCode::IrreflexiveViolation,
                        format!("{} may not relate an entity to itself", triple.relation),
                    ),
                    schema_matched: false,
                };
            }
        }
    }

    if ctx.is_anti_symmetric(&triple.relation) {
        if let TailRef::Entity(tail) = &triple.tail {
            let reversed_in_batch = accepted_so_far.iter().any(|t| {
                t.relation == triple.relation
                    && t.head == *tail
                    && t.tail.as_entity() == Some(&triple.head)
            });
            let reversed_in_graph = ctx.graph.active_facts(&triple.head).iter().any(|e| {
                e.relation == triple.relation
                    && e.head == *tail
                    && e.tail.as_entity() == Some(&triple.head)
            });
            if reversed_in_batch || reversed_in_graph {
                return LogicOutcome {
                    verdict: Verdict::rejected(
                        ReasonCode::InverseConflict,
                        format!("inverse assertion of {} already holds", triple.relation),
                    ),
                    schema_matched: false,
                };
            }
        }
    }

    // Schema-constraint checks apply only after the cold-start batch and
    // only when a promoted schema covers the relation.
    if ctx.batch_index > 0 {
        if let Some(schema) = ctx.mkb.relation_schema_by_label(&triple.relation) {
            let head_type = ctx.type_of(&triple.head);
            if !type_satisfies(&head_type, &schema.domain_type) {
                return LogicOutcome {
                    verdict: Verdict::rejected(
                        ReasonCode::DomainTypeViolation,
                        format!(
                            "head type {head_type} violates domain {} of {}",
                            schema.domain_type, schema.relation_label
                        ),
                    ),
                    schema_matched: true,
                };
            }
            let tail_type = match &triple.tail {
                TailRef::Entity(id) => ctx.type_of(id),
                TailRef::Literal(_) => "Literal".to_string(),
            };
            if !type_satisfies(&tail_type, &schema.range_type) {
                return LogicOutcome {
                    verdict: Verdict::rejected(
                        ReasonCode::RangeTypeViolation,
                        format!(
                            "tail type {tail_type} violates range {} of {}",
                            schema.range_type, schema.relation_label
                        ),
                    ),
                    schema_matched: true,
                };
            }
            return LogicOutcome {
                verdict: Verdict::accepted("passes consistency and schema constraints"),
                schema_matched: true,
            };
        }
    }

    LogicOutcome {
        verdict: Verdict::accepted("passes general consistency"),
        schema_matched: false,
    }
}

/// Logical verification for an event: role-type constraints against a
/// matched event schema; unseen event shapes bypass and go to induction.
pub fn verify_logic_event(event: &EventInstance, ctx: &LogicContext<'_>) -> LogicOutcome {
    if ctx.batch_index > 0 {
        if let Some(schema) = ctx.mkb.event_schema_for_trigger(&event.trigger_lemma) {
            for (role, filler) in &event.bindings {
                if let Some(constraint) = schema.role(role) {
                    let filler_type = ctx.type_of(filler);
                    if !type_satisfies(&filler_type, &constraint.type_constraint) {
                        return LogicOutcome {
                            verdict: Verdict::rejected(
                                ReasonCode::RoleTypeViolation,
                                format!(
                                    "role {role} requires {} but {} is {filler_type}",
                                    constraint.type_constraint,
                                    filler.as_str()
                                ),
                            ),
                            schema_matched: true,
                        };
                    }
                }
            }
            return LogicOutcome {
                verdict: Verdict::accepted("event satisfies schema role constraints"),
                schema_matched: true,
            };
        }
    }
    LogicOutcome {
        verdict: Verdict::accepted("no matching event schema; routed to induction"),
        schema_matched: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Informational,
    Evolutionary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentLabel {
    pub intent: Intent,
    pub triggers_matched: Vec<String>,
    pub targeted_entity_ids: Vec<EntityId>,
    /// Set when the judge was unavailable and the conservative default
    /// (informational — never deprecate unconfirmed) was applied.
    pub judge_fallback: bool,
}

/// The entities an evolutionary event transitions: subject-role bindings
/// when present, otherwise every bound entity.
fn targeted_entities(event: &EventInstance) -> Vec<EntityId> {
    let subjects: Vec<EntityId> = event
        .bindings
        .iter()
        .filter(|(role, _)| role.as_str() == SUBJECT_ROLE)
        .map(|(_, id)| id.clone())
        .collect();
    if subjects.is_empty() {
        event.bindings.values().cloned().collect()
    } else {
        subjects
    }
}

/// Classify an event's intent. A trigger-lexicon hit short-circuits to
/// evolutionary; everything else is decided by the judge, defaulting to
/// informational when the judge is unavailable.
pub fn classify_intent(
    event: &EventInstance,
    judge: &dyn Judge,
    cfg: &PipelineConfig,
) -> IntentLabel {
    if cfg.is_evolutionary_trigger(&event.trigger_lemma) {
        return IntentLabel {
            intent: Intent::Evolutionary,
            triggers_matched: vec![event.trigger_lemma.clone()],
            targeted_entity_ids: targeted_entities(event),
            judge_fallback: false,
        };
    }
    let evidence = event.evidence.first().map(|e| e.span.clone()).unwrap_or_default();
    match judge.judge_intent(&event.fingerprint(), &event.fingerprint(), &evidence) {
        Ok(IntentJudgment::Evolutionary) => IntentLabel {
            intent: Intent::Evolutionary,
            triggers_matched: Vec::new(),
            targeted_entity_ids: targeted_entities(event),
            judge_fallback: false,
        },
        Ok(IntentJudgment::Informational) => IntentLabel {
            intent: Intent::Informational,
            triggers_matched: Vec::new(),
            targeted_entity_ids: Vec::new(),
            judge_fallback: false,
        },
        Err(_) => IntentLabel {
            intent: Intent::Informational,
            triggers_matched: Vec::new(),
            targeted_entity_ids: Vec::new(),
            judge_fallback: true,
        },
    }
}

/// Everything an evolutionary event does to the graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolutionEffects {
    /// `(subject, "status", new_state)` transition facts.
    pub transition_facts: Vec<(EntityId, String, String)>,
    /// `(successor, trigger_lemma, subject)` facts when the event names a
    /// replacement.
    pub successor_facts: Vec<(EntityId, String, EntityId)>,
    /// Active edges to soft-deprecate, with the justifying evidence.
    pub targets: Vec<(EdgeId, Evidence)>,
}

/// Resolve the outdated facts an evolutionary event targets: active edges
/// incident to the targeted entities whose relation label is semantically
/// close to the transitioned property. Reads the pre-batch graph only. An
/// empty result is legal — there may simply be nothing to retire.
pub fn resolve_deprecation_targets(
    event: &EventInstance,
    label: &IntentLabel,
    pre_batch_graph: &GraphState,
    embedder: &dyn Embedder,
    cfg: &PipelineConfig,
) -> Result<Vec<(EdgeId, Evidence)>, AdapterError> {
    debug_assert_eq!(label.intent, Intent::Evolutionary);
    let evidence = event
        .evidence
        .first()
        .cloned()
        .unwrap_or_else(|| Evidence::new("unknown", event.fingerprint()));
    let property_vec = embedder.embed_one(TRANSITION_PROPERTY)?;

    let mut targets: BTreeMap<EdgeId, Evidence> = BTreeMap::new();
    for entity in &label.targeted_entity_ids {
        for edge in pre_batch_graph.active_facts(entity) {
            let relation_vec = embedder.embed_one(&edge.relation)?;
            if relation_vec.cosine(&property_vec) >= cfg.thresholds.tau_target {
                targets.entry(edge.edge_id.clone()).or_insert_with(|| evidence.clone());
            }
        }
    }
    Ok(targets.into_iter().collect())
}

/// Full effect set of a verified evolutionary event: the state-transition
/// fact per targeted entity, a successor fact when a replacement is named,
/// and the deprecation targets.
pub fn evolution_effects(
    event: &EventInstance,
    label: &IntentLabel,
    pre_batch_graph: &GraphState,
    embedder: &dyn Embedder,
    cfg: &PipelineConfig,
) -> Result<EvolutionEffects, AdapterError> {
    let new_state = grammar::participle_of(&event.trigger_lemma).to_string();
    let mut effects = EvolutionEffects {
        targets: resolve_deprecation_targets(event, label, pre_batch_graph, embedder, cfg)?,
        ..Default::default()
    };
    for subject in &label.targeted_entity_ids {
        effects.transition_facts.push((
            subject.clone(),
            TRANSITION_PROPERTY.to_string(),
            new_state.clone(),
        ));
        for role in SUCCESSOR_ROLES {
            if let Some(successor) = event.bindings.get(*role) {
                effects.successor_facts.push((
                    successor.clone(),
                    event.trigger_lemma.clone(),
                    subject.clone(),
                ));
            }
        }
    }
    effects.transition_facts.sort();
    effects.transition_facts.dedup();
    effects.successor_facts.sort();
    effects.successor_facts.dedup();
    Ok(effects)
}
