//! Deterministic mock backends.
//!
//! Every mock is a pure function of its inputs plus an optional scripted
//! fixture table, so pipeline runs replay bit-for-bit. Fixture keys are
//! namespaced per role:
//!
//! ```text
//! judge_evidence|<fingerprint>      accept | reject:<why> | unavailable
//! judge_intent|<fingerprint>        informational | evolutionary | unavailable
//! pair|<a>|<b>                      merge | separate | hierarchy:first_is_parent | ...
//! reuse|<canonical>|<entity_id>     confirm | deny
//! type|<mention>                    <TypeName>
//! evaluate_relation|<label>         pass | fail
//! evaluate_event|<event_type>       pass | fail
//! chat|<template>|<binding-hash>    <json object>
//! ```

use super::{
    AdapterError, ChatBackend, ChatRequest, ChatResponse, Embedder, EmbeddingVector, FixtureTable,
};
use crate::extract::{
    grammar, Document, EventCandidate, ExtractionBackend, ExtractionContext, MentionSpan,
    Statement, TailCandidate, TripleCandidate,
};
use crate::govern::{EvidenceJudgment, IntentJudgment, Judge};
use crate::graph::Evidence;
use crate::normalize::{ClusterSummary, PairAdjudicator, PairVerdict, ReuseCandidate, TypeInferencer};
use crate::par;
use crate::schema::SchemaEvaluator;
use std::collections::BTreeMap;
use std::sync::Arc;

pub const MOCK_EMBEDDING_DIM: usize = 256;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    hash
}

/// Character n-gram hashing embedder: identical strings embed identically,
/// near-duplicate strings share most n-grams and score high.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dimension: usize,
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self { dimension: MOCK_EMBEDDING_DIM }
    }
}

impl MockEmbedder {
    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let normalized: Vec<char> = {
            let mut s = String::with_capacity(text.len() + 2);
            s.push('\u{2}');
            s.push_str(&text.to_lowercase());
            s.push('\u{3}');
            s.chars().collect()
        };
        let mut values = vec![0.0f32; self.dimension];
        for n in [2usize, 3] {
            if normalized.len() < n {
                continue;
            }
            for window in normalized.windows(n) {
                let gram: String = window.iter().collect();
                let h = fnv1a(gram.as_bytes());
                let bucket = (h % self.dimension as u64) as usize;
                let sign = if (h >> 63) & 1 == 1 { 1.0 } else { -1.0 };
                values[bucket] += sign;
            }
        }
        EmbeddingVector::new(values)
    }
}

impl Embedder for MockEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, AdapterError> {
        if let Some(empty) = texts.iter().find(|t| t.is_empty()) {
            let _ = empty;
            return Err(AdapterError::InvalidInput("cannot embed an empty string".into()));
        }
        Ok(par::map_slice(texts, |t| self.embed_text(t)))
    }
}

/// Test embedder with hand-set vectors; unknown texts fail loudly.
#[derive(Debug, Clone, Default)]
pub struct FixtureEmbedder {
    dimension: usize,
    vectors: BTreeMap<String, EmbeddingVector>,
}

impl FixtureEmbedder {
    pub fn new(dimension: usize) -> Self {
        Self { dimension, vectors: BTreeMap::new() }
    }

    pub fn set(&mut self, text: &str, values: Vec<f32>) {
        assert_eq!(values.len(), self.dimension, "fixture vector dimension");
        self.vectors.insert(text.to_string(), EmbeddingVector::new(values));
    }
}

impl Embedder for FixtureEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, AdapterError> {
        texts
            .iter()
            .map(|t| {
                self.vectors
                    .get(t)
                    .cloned()
                    .ok_or_else(|| AdapterError::FixtureMiss(format!("embed|{t}")))
            })
            .collect()
    }
}

/// Grammar-driven extraction backend: one proposition per statement,
/// evidence is the statement itself, confidence is always 1.0.
#[derive(Debug, Clone, Default)]
pub struct MockExtractor;

impl MockExtractor {
    pub fn new() -> Self {
        Self
    }
}

fn span(doc: &Document, stmt: &Statement, text: String, offset: usize) -> MentionSpan {
    MentionSpan { text, doc_id: doc.doc_id.clone(), offset: stmt.offset + offset }
}

impl ExtractionBackend for MockExtractor {
    fn extract_triples(
        &self,
        doc: &Document,
        statements: &[Statement],
        _ctx: &ExtractionContext,
    ) -> Result<Vec<TripleCandidate>, AdapterError> {
        let mut out = Vec::new();
        for stmt in statements {
            if let Some(grammar::Parsed::Triple { head, relation, tail }) =
                grammar::parse_triple(&stmt.text)
            {
                out.push(TripleCandidate {
                    head: span(doc, stmt, head.0, head.1),
                    relation,
                    tail: match tail {
                        (text, Some(offset)) => TailCandidate::Mention(span(doc, stmt, text, offset)),
                        (text, None) => TailCandidate::Literal(text),
                    },
                    evidence: Evidence::new(doc.doc_id.clone(), stmt.text.clone()),
                    confidence: 1.0,
                });
            }
        }
        Ok(out)
    }

    fn extract_events(
        &self,
        doc: &Document,
        statements: &[Statement],
        _ctx: &ExtractionContext,
    ) -> Result<Vec<EventCandidate>, AdapterError> {
        let mut out = Vec::new();
        for stmt in statements {
            if let Some(grammar::Parsed::Event { trigger_surface, trigger_lemma, roles, time }) =
                grammar::parse_event(&stmt.text)
            {
                if roles.is_empty() {
                    continue;
                }
                out.push(EventCandidate {
                    trigger_surface,
                    trigger_lemma,
                    role_bindings: roles
                        .into_iter()
                        .map(|(role, text, offset)| (role, span(doc, stmt, text, offset)))
                        .collect(),
                    time,
                    evidence: Evidence::new(doc.doc_id.clone(), stmt.text.clone()),
                    confidence: 1.0,
                });
            }
        }
        Ok(out)
    }
}

/// Scripted judge: verdicts come from the fixture table, defaulting to the
/// conservative path (accept / informational) when a candidate is not
/// scripted.
#[derive(Clone)]
pub struct MockJudge {
    fixtures: Arc<FixtureTable>,
}

impl MockJudge {
    pub fn new(fixtures: Arc<FixtureTable>) -> Self {
        Self { fixtures }
    }
}

impl Judge for MockJudge {
    fn judge_evidence(
        &self,
        fingerprint: &str,
        _candidate_summary: &str,
        _evidence: &str,
    ) -> Result<EvidenceJudgment, AdapterError> {
        match self.fixtures.get(&format!("judge_evidence|{fingerprint}")) {
            None => Ok(EvidenceJudgment {
                contradicted: false,
                rationale: "not contradicted by the evidence".into(),
            }),
            Some("unavailable") => {
                Err(AdapterError::BackendUnavailable("scripted judge outage".into()))
            }
            Some(v) if v == "accept" || v.starts_with("accept:") => Ok(EvidenceJudgment {
                contradicted: false,
                rationale: v.strip_prefix("accept:").unwrap_or("supported").to_string(),
            }),
            Some(v) if v.starts_with("reject") => Ok(EvidenceJudgment {
                contradicted: true,
                rationale: v.strip_prefix("reject:").unwrap_or("contradicted").to_string(),
            }),
            Some(other) => Err(AdapterError::InvalidInput(format!(
                "unknown judge_evidence fixture value `{other}`"
            ))),
        }
    }

    fn judge_intent(
        &self,
        fingerprint: &str,
        _event_summary: &str,
        _evidence: &str,
    ) -> Result<IntentJudgment, AdapterError> {
        match self.fixtures.get(&format!("judge_intent|{fingerprint}")) {
            None | Some("informational") => Ok(IntentJudgment::Informational),
            Some("evolutionary") => Ok(IntentJudgment::Evolutionary),
            Some("unavailable") => {
                Err(AdapterError::BackendUnavailable("scripted judge outage".into()))
            }
            Some(other) => Err(AdapterError::InvalidInput(format!(
                "unknown judge_intent fixture value `{other}`"
            ))),
        }
    }
}

fn types_compatible(a: &str, b: &str) -> bool {
    a == b || a == "Entity" || b == "Entity"
}

/// Scripted coreference adjudicator. Unscripted mention pairs merge — the
/// clusterer already gated them by type and similarity. Unscripted reuse
/// confirms on an exact alias match or on similarity at or above the
/// configured bar, with compatible types either way.
#[derive(Clone)]
pub struct MockAdjudicator {
    fixtures: Arc<FixtureTable>,
    reuse_threshold: f32,
}

impl MockAdjudicator {
    pub fn new(fixtures: Arc<FixtureTable>, reuse_threshold: f32) -> Self {
        Self { fixtures, reuse_threshold }
    }
}

impl PairAdjudicator for MockAdjudicator {
    fn adjudicate_mention_pair(
        &self,
        first: &str,
        second: &str,
        _inferred_type: &str,
    ) -> Result<PairVerdict, AdapterError> {
        let direct = self.fixtures.get(&format!("pair|{first}|{second}"));
        let (value, flipped) = match direct {
            Some(v) => (Some(v), false),
            None => (self.fixtures.get(&format!("pair|{second}|{first}")), true),
        };
        match value {
            None | Some("merge") => Ok(PairVerdict::Merge),
            Some("separate") => Ok(PairVerdict::Separate),
            Some("hierarchy:first_is_parent") => {
                Ok(PairVerdict::Hierarchy { parent_is_first: !flipped })
            }
            Some("hierarchy:second_is_parent") => {
                Ok(PairVerdict::Hierarchy { parent_is_first: flipped })
            }
            Some("unavailable") => {
                Err(AdapterError::BackendUnavailable("scripted adjudicator outage".into()))
            }
            Some(other) => {
                Err(AdapterError::InvalidInput(format!("unknown pair fixture value `{other}`")))
            }
        }
    }

    fn confirm_reuse(
        &self,
        cluster: &ClusterSummary<'_>,
        candidate: &ReuseCandidate,
    ) -> Result<bool, AdapterError> {
        let key = format!("reuse|{}|{}", cluster.canonical, candidate.entity_id.as_str());
        match self.fixtures.get(&key) {
            Some("confirm") => return Ok(true),
            Some("deny") => return Ok(false),
            Some("unavailable") => {
                return Err(AdapterError::BackendUnavailable(
                    "scripted adjudicator outage".into(),
                ))
            }
            Some(other) => {
                return Err(AdapterError::InvalidInput(format!(
                    "unknown reuse fixture value `{other}`"
                )))
            }
            None => {}
        }
        if !types_compatible(cluster.entity_type, &candidate.entity_type) {
            return Ok(false);
        }
        Ok(candidate.exact_alias_match || candidate.similarity >= self.reuse_threshold)
    }
}

/// Built-in mention → type lexicon; everything else is `Entity`.
const TYPE_LEXICON: &[(&str, &str)] = &[
    ("kubernetes", "Platform"),
    ("k8s", "Platform"),
    ("podsecuritypolicy", "ApiResource"),
    ("podsecurityadmission", "ApiResource"),
    ("admissionplugin", "Concept"),
    ("platform", "Concept"),
    ("foundation", "Concept"),
    ("library", "Concept"),
    ("cncf", "Organization"),
    ("acme", "Organization"),
    ("initech", "Organization"),
    ("globex", "Organization"),
    ("umbrella", "Organization"),
    ("stark", "Organization"),
    ("wayne", "Organization"),
    ("vandelay", "Organization"),
    ("kruger", "Organization"),
    ("hooli", "Organization"),
    ("microsoft", "Organization"),
    ("google", "Organization"),
    ("google inc", "Organization"),
    ("elon musk", "Person"),
    ("austin", "Location"),
    ("boston", "Location"),
    ("malibu", "Location"),
    ("menlo park", "Location"),
    ("python", "Software"),
];

/// Lexicon-backed type inferencer with fixture overrides.
#[derive(Clone)]
pub struct MockTypeInferencer {
    fixtures: Arc<FixtureTable>,
}

impl MockTypeInferencer {
    pub fn new(fixtures: Arc<FixtureTable>) -> Self {
        Self { fixtures }
    }
}

impl TypeInferencer for MockTypeInferencer {
    fn infer_type(&self, mention: &str) -> Result<String, AdapterError> {
        if let Some(t) = self.fixtures.get(&format!("type|{mention}")) {
            return Ok(t.to_string());
        }
        let key = mention.to_lowercase();
        Ok(TYPE_LEXICON
            .iter()
            .find(|(m, _)| *m == key)
            .map_or("Entity", |(_, t)| *t)
            .to_string())
    }
}

/// Scripted schema evaluator; unscripted proposals pass.
#[derive(Clone)]
pub struct MockEvaluator {
    fixtures: Arc<FixtureTable>,
}

impl MockEvaluator {
    pub fn new(fixtures: Arc<FixtureTable>) -> Self {
        Self { fixtures }
    }
}

impl SchemaEvaluator for MockEvaluator {
    fn evaluate_relation(
        &self,
        canonical_label: &str,
        _member_labels: &[String],
    ) -> Result<bool, AdapterError> {
        match self.fixtures.get(&format!("evaluate_relation|{canonical_label}")) {
            None | Some("pass") => Ok(true),
            Some("fail") => Ok(false),
            Some("unavailable") => {
                Err(AdapterError::BackendUnavailable("scripted evaluator outage".into()))
            }
            Some(other) => Err(AdapterError::InvalidInput(format!(
                "unknown evaluate_relation fixture value `{other}`"
            ))),
        }
    }

    fn evaluate_event(&self, event_type: &str, _roles: &[String]) -> Result<bool, AdapterError> {
        match self.fixtures.get(&format!("evaluate_event|{event_type}")) {
            None | Some("pass") => Ok(true),
            Some("fail") => Ok(false),
            Some("unavailable") => {
                Err(AdapterError::BackendUnavailable("scripted evaluator outage".into()))
            }
            Some(other) => Err(AdapterError::InvalidInput(format!(
                "unknown evaluate_event fixture value `{other}`"
            ))),
        }
    }
}

/// Fixture-resolved chat backend. Misses fail loudly with the fingerprint
/// so the fixture can be authored; malformed fixtures get one retry and
/// then surface as backend unavailability, mirroring the live contract.
#[derive(Clone)]
pub struct MockChat {
    fixtures: Arc<FixtureTable>,
}

impl MockChat {
    pub fn new(fixtures: Arc<FixtureTable>) -> Self {
        Self { fixtures }
    }

    fn resolve_once(&self, request: &ChatRequest) -> Result<ChatResponse, AdapterError> {
        let fingerprint = request.fingerprint();
        let raw = self
            .fixtures
            .get(&fingerprint)
            .ok_or(AdapterError::FixtureMiss(fingerprint))?;
        if raw == "unavailable" {
            return Err(AdapterError::BackendUnavailable("scripted chat outage".into()));
        }
        let fields: BTreeMap<String, serde_json::Value> = serde_json::from_str(raw)
            .map_err(|e| AdapterError::InvalidInput(format!("malformed fixture response: {e}")))?;
        request
            .response_shape
            .validate(&fields)
            .map_err(AdapterError::InvalidInput)?;
        Ok(ChatResponse { fields, raw: raw.to_string(), tokens_used: None })
    }
}

impl ChatBackend for MockChat {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, AdapterError> {
        match self.resolve_once(request) {
            Ok(r) => Ok(r),
            Err(AdapterError::InvalidInput(_)) => match self.resolve_once(request) {
                Ok(r) => Ok(r),
                Err(AdapterError::InvalidInput(reason)) => {
                    Err(AdapterError::BackendUnavailable(format!(
                        "response failed shape validation after retry: {reason}"
                    )))
                }
                Err(e) => Err(e),
            },
            Err(e) => Err(e),
        }
    }
}
