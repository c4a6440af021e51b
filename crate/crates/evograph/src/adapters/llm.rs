//! Chat-completion implementations of the pipeline's role traits.
//!
//! Each role issues a [`ChatRequest`] naming a prompt template and the
//! placeholder bindings, requests a structured (JSON object) response of a
//! fixed shape, and maps the validated fields onto the role's result type.
//! Prompt rendering and shape retries are the chat backend's concern.

use super::{AdapterError, ChatBackend, ChatRequest, ResponseShape};
use crate::extract::{
    Document, EventCandidate, ExtractionBackend, ExtractionContext, MentionSpan, Statement,
    TailCandidate, TripleCandidate,
};
use crate::govern::{EvidenceJudgment, IntentJudgment, Judge};
use crate::graph::Evidence;
use crate::normalize::{ClusterSummary, PairAdjudicator, PairVerdict, ReuseCandidate, TypeInferencer};
use crate::schema::SchemaEvaluator;
use crate::time::TimeRef;
use std::sync::Arc;

fn schemas_block(ctx: &ExtractionContext) -> String {
    if ctx.schemas.is_empty() {
        return "(none)".to_string();
    }
    ctx.schemas
        .iter()
        .map(|s| format!("- [{}] {}", s.kind, s.label))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Locate a mention inside a statement, falling back to the statement
/// start when the backend paraphrased the surface form.
fn locate(doc: &Document, stmt: &Statement, mention: &str) -> MentionSpan {
    let offset = stmt.text.find(mention).map_or(stmt.offset, |o| stmt.offset + o);
    MentionSpan { text: mention.to_string(), doc_id: doc.doc_id.clone(), offset }
}

pub struct LlmExtractor {
    chat: Arc<dyn ChatBackend>,
}

impl LlmExtractor {
    pub fn new(chat: Arc<dyn ChatBackend>) -> Self {
        Self { chat }
    }
}

impl ExtractionBackend for LlmExtractor {
    fn extract_triples(
        &self,
        doc: &Document,
        statements: &[Statement],
        ctx: &ExtractionContext,
    ) -> Result<Vec<TripleCandidate>, AdapterError> {
        let mut out = Vec::new();
        for stmt in statements {
            let request = ChatRequest::new("extract_triples", 0.0, ResponseShape::of(&["triples"]))
                .bind("few_shot", ctx.few_shot.clone())
                .bind("schemas", schemas_block(ctx))
                .bind("document", stmt.text.clone());
            let response = self.chat.chat(&request)?;
            let Some(list) = response.fields.get("triples").and_then(|v| v.as_array()) else {
                continue;
            };
            for item in list {
                let head = item.get("head").and_then(|v| v.as_str()).unwrap_or_default();
                let relation = item.get("relation").and_then(|v| v.as_str()).unwrap_or_default();
                let tail = item.get("tail").and_then(|v| v.as_str()).unwrap_or_default();
                if head.is_empty() || relation.is_empty() || tail.is_empty() {
                    continue;
                }
                let literal = item
                    .get("tail_is_literal")
                    .and_then(|v| v.as_bool())
                    .unwrap_or_else(|| !tail.chars().next().is_some_and(|c| c.is_uppercase()));
                let confidence =
                    item.get("confidence").and_then(|v| v.as_f64()).map_or(1.0, |c| c as f32);
                out.push(TripleCandidate {
                    head: locate(doc, stmt, head),
                    relation: relation.to_string(),
                    tail: if literal {
                        TailCandidate::Literal(tail.to_string())
                    } else {
                        TailCandidate::Mention(locate(doc, stmt, tail))
                    },
                    evidence: Evidence::new(doc.doc_id.clone(), stmt.text.clone()),
                    confidence,
                });
            }
        }
        Ok(out)
    }

    fn extract_events(
        &self,
        doc: &Document,
        statements: &[Statement],
        ctx: &ExtractionContext,
    ) -> Result<Vec<EventCandidate>, AdapterError> {
        let mut out = Vec::new();
        for stmt in statements {
            let request = ChatRequest::new("extract_events", 0.0, ResponseShape::of(&["events"]))
                .bind("few_shot", ctx.few_shot.clone())
                .bind("schemas", schemas_block(ctx))
                .bind("document", stmt.text.clone());
            let response = self.chat.chat(&request)?;
            let Some(list) = response.fields.get("events").and_then(|v| v.as_array()) else {
                continue;
            };
            for item in list {
                let trigger = item.get("trigger").and_then(|v| v.as_str()).unwrap_or_default();
                let Some(roles) = item.get("roles").and_then(|v| v.as_object()) else {
                    continue;
                };
                if trigger.is_empty() || roles.is_empty() {
                    continue;
                }
                let time = item
                    .get("time")
                    .and_then(|v| v.as_str())
                    .and_then(TimeRef::parse_canonical);
                let confidence =
                    item.get("confidence").and_then(|v| v.as_f64()).map_or(1.0, |c| c as f32);
                out.push(EventCandidate {
                    trigger_surface: trigger.to_string(),
                    trigger_lemma: crate::extract::grammar::lemma_of(trigger),
                    role_bindings: roles
                        .iter()
                        .filter_map(|(role, v)| {
                            v.as_str().map(|m| (role.clone(), locate(doc, stmt, m)))
                        })
                        .collect(),
                    time,
                    evidence: Evidence::new(doc.doc_id.clone(), stmt.text.clone()),
                    confidence,
                });
            }
        }
        Ok(out)
    }
}

pub struct LlmJudge {
    chat: Arc<dyn ChatBackend>,
    temperature: f32,
}

impl LlmJudge {
    pub fn new(chat: Arc<dyn ChatBackend>, temperature: f32) -> Self {
        Self { chat, temperature }
    }
}

impl Judge for LlmJudge {
    fn judge_evidence(
        &self,
        fingerprint: &str,
        candidate_summary: &str,
        evidence: &str,
    ) -> Result<EvidenceJudgment, AdapterError> {
        let request =
            ChatRequest::new("judge_evidence", self.temperature, ResponseShape::of(&["decision"]))
                .bind("fingerprint", fingerprint)
                .bind("candidate", candidate_summary)
                .bind("evidence", evidence);
        let response = self.chat.chat(&request)?;
        match response.str_field("decision") {
            Some("rejected") => Ok(EvidenceJudgment {
                contradicted: true,
                rationale: response
                    .str_field("rationale")
                    .unwrap_or("evidence contradicts the candidate")
                    .to_string(),
            }),
            Some(_) => Ok(EvidenceJudgment {
                contradicted: false,
                rationale: response.str_field("rationale").unwrap_or("accepted").to_string(),
            }),
            None => Err(AdapterError::BackendUnavailable("judge returned no decision".into())),
        }
    }

    fn judge_intent(
        &self,
        fingerprint: &str,
        event_summary: &str,
        evidence: &str,
    ) -> Result<IntentJudgment, AdapterError> {
        let request =
            ChatRequest::new("judge_intent", self.temperature, ResponseShape::of(&["intent"]))
                .bind("fingerprint", fingerprint)
                .bind("event", event_summary)
                .bind("evidence", evidence);
        let response = self.chat.chat(&request)?;
        match response.str_field("intent") {
            Some("evolutionary") => Ok(IntentJudgment::Evolutionary),
            Some(_) => Ok(IntentJudgment::Informational),
            None => Err(AdapterError::BackendUnavailable("judge returned no intent".into())),
        }
    }
}

pub struct LlmAdjudicator {
    chat: Arc<dyn ChatBackend>,
}

impl LlmAdjudicator {
    pub fn new(chat: Arc<dyn ChatBackend>) -> Self {
        Self { chat }
    }
}

impl PairAdjudicator for LlmAdjudicator {
    fn adjudicate_mention_pair(
        &self,
        first: &str,
        second: &str,
        inferred_type: &str,
    ) -> Result<PairVerdict, AdapterError> {
        let request = ChatRequest::new("adjudicate_pair", 0.0, ResponseShape::of(&["verdict"]))
            .bind("first", first)
            .bind("second", second)
            .bind("entity_type", inferred_type);
        let response = self.chat.chat(&request)?;
        match response.str_field("verdict") {
            Some("merge") => Ok(PairVerdict::Merge),
            Some("separate") => Ok(PairVerdict::Separate),
            Some("hierarchy") => Ok(PairVerdict::Hierarchy {
                parent_is_first: response.bool_field("parent_is_first").unwrap_or(true),
            }),
            _ => Err(AdapterError::BackendUnavailable("adjudicator returned no verdict".into())),
        }
    }

    fn confirm_reuse(
        &self,
        cluster: &ClusterSummary<'_>,
        candidate: &ReuseCandidate,
    ) -> Result<bool, AdapterError> {
        let request = ChatRequest::new("adjudicate_reuse", 0.0, ResponseShape::of(&["reuse"]))
            .bind("cluster", cluster.canonical)
            .bind("cluster_type", cluster.entity_type)
            .bind("members", cluster.members.join(", "))
            .bind("candidate", candidate.canonical_name.clone())
            .bind("candidate_id", candidate.entity_id.as_str())
            .bind("candidate_type", candidate.entity_type.clone());
        let response = self.chat.chat(&request)?;
        response.bool_field("reuse").ok_or_else(|| {
            AdapterError::BackendUnavailable("adjudicator returned no reuse flag".into())
        })
    }
}

pub struct LlmTypeInferencer {
    chat: Arc<dyn ChatBackend>,
}

impl LlmTypeInferencer {
    pub fn new(chat: Arc<dyn ChatBackend>) -> Self {
        Self { chat }
    }
}

impl TypeInferencer for LlmTypeInferencer {
    fn infer_type(&self, mention: &str) -> Result<String, AdapterError> {
        let request = ChatRequest::new("infer_type", 0.0, ResponseShape::of(&["entity_type"]))
            .bind("mention", mention);
        let response = self.chat.chat(&request)?;
        Ok(response.str_field("entity_type").unwrap_or("Entity").to_string())
    }
}

pub struct LlmEvaluator {
    chat: Arc<dyn ChatBackend>,
}

impl LlmEvaluator {
    pub fn new(chat: Arc<dyn ChatBackend>) -> Self {
        Self { chat }
    }
}

impl SchemaEvaluator for LlmEvaluator {
    fn evaluate_relation(
        &self,
        canonical_label: &str,
        member_labels: &[String],
    ) -> Result<bool, AdapterError> {
        let request = ChatRequest::new("evaluate_relation", 0.0, ResponseShape::of(&["pass"]))
            .bind("label", canonical_label)
            .bind("members", member_labels.join(", "));
        let response = self.chat.chat(&request)?;
        response.bool_field("pass").ok_or_else(|| {
            AdapterError::BackendUnavailable("evaluator returned no verdict".into())
        })
    }

    fn evaluate_event(&self, event_type: &str, roles: &[String]) -> Result<bool, AdapterError> {
        let request = ChatRequest::new("evaluate_event", 0.0, ResponseShape::of(&["pass"]))
            .bind("event_type", event_type)
            .bind("roles", roles.join(", "));
        let response = self.chat.chat(&request)?;
        response.bool_field("pass").ok_or_else(|| {
            AdapterError::BackendUnavailable("evaluator returned no verdict".into())
        })
    }
}
