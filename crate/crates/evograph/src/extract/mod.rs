//! Stage 1: dual-track extraction.
//!
//! Statements are routed to the static triple track or the event track and
//! extracted under schema constraints retrieved from the MKB. On the first
//! batch (cold start) the context carries only the few-shot block; later
//! batches inject the top-K schemas retrieved with the batch centroid
//! embedding.

pub mod grammar;

use crate::adapters::{AdapterError, Embedder};
use crate::graph::Evidence;
use crate::ids::SchemaId;
use crate::mkb::Mkb;
use crate::par;
use crate::time::TimeRef;
use serde::{Deserialize, Serialize};

/// Built-in few-shot block used when no external template is configured.
pub const DEFAULT_FEW_SHOT: &str = "\
Statement: Python is a programming language.\n\
Triple: (Python, is_a, programming language)\n\
Statement: In 2022, Microsoft announced Windows 10 EOL.\n\
Event: trigger=announced roles=[announcer: Microsoft, announced: Windows 10 EOL] time=2022\n";

/// One input document of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    /// Zero-based stream window this document belongs to.
    pub window: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

/// One sentence-level statement, a verbatim slice of its document.
#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub doc_id: String,
    pub text: String,
    /// Byte offset of the statement within the document text.
    pub offset: usize,
}

/// Deterministic sentence segmentation: a terminator ends a statement only
/// when followed by whitespace and an uppercase letter (or end of text), so
/// `v1.21` and `Inc.` never split.
pub fn segment(doc: &Document) -> Vec<Statement> {
    let text = doc.text.as_str();
    let bytes = text.as_bytes();
    let mut statements = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c == '.' || c == '!' || c == '?' {
            let mut j = i + 1;
            let mut saw_space = false;
            while j < bytes.len() && (bytes[j] as char).is_whitespace() {
                saw_space = true;
                j += 1;
            }
            let at_end = j >= bytes.len();
            let next_upper = !at_end && (bytes[j] as char).is_ascii_uppercase();
            if at_end || (saw_space && next_upper) {
                let slice = text[start..=i].trim();
                if !slice.is_empty() {
                    let lead = text[start..].find(slice).unwrap_or(0);
                    statements.push(Statement {
                        doc_id: doc.doc_id.clone(),
                        text: slice.to_string(),
                        offset: start + lead,
                    });
                }
                start = j;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    let tail = text[start.min(text.len())..].trim();
    if !tail.is_empty() {
        let lead = text[start..].find(tail).unwrap_or(0);
        statements.push(Statement {
            doc_id: doc.doc_id.clone(),
            text: tail.to_string(),
            offset: start + lead,
        });
    }
    statements
}

/// Representation track for a statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Track {
    StaticTriple,
    Event,
}

/// Route a statement: events are statements with a temporal marker, a
/// state-transition / trigger verb, or more than two distinct argument
/// mentions; everything else stays a static triple.
pub fn route_statement(statement: &str) -> Track {
    if grammar::has_temporal_marker(statement)
        || grammar::has_event_verb(statement)
        || grammar::mention_count(statement) > 2
    {
        Track::Event
    } else {
        Track::StaticTriple
    }
}

/// An entity-like mention span inside a document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MentionSpan {
    pub text: String,
    pub doc_id: String,
    /// Byte offset within the document.
    pub offset: usize,
}

/// Tail of a triple candidate: a mention or a literal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailCandidate {
    Mention(MentionSpan),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleCandidate {
    pub head: MentionSpan,
    pub relation: String,
    pub tail: TailCandidate,
    pub evidence: Evidence,
    pub confidence: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCandidate {
    pub trigger_surface: String,
    pub trigger_lemma: String,
    pub role_bindings: Vec<(String, MentionSpan)>,
    pub time: Option<TimeRef>,
    pub evidence: Evidence,
    pub confidence: f32,
}

/// A triple candidate after normalization: mentions resolved to canonical
/// entity ids, relation label canonicalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedTriple {
    pub head: crate::ids::EntityId,
    pub relation: String,
    pub tail: crate::graph::TailRef,
    pub evidence: Vec<crate::graph::Evidence>,
    pub confidence: f32,
}

impl ResolvedTriple {
    /// Stable fingerprint used by scripted fixtures and batch reports.
    pub fn fingerprint(&self) -> String {
        format!(
            "triple|{}|{}|{}",
            self.head.as_str(),
            self.relation,
            self.tail.value()
        )
    }
}

/// A normalized event instance: role bindings resolved to canonical entity
/// ids, ready for governance and reification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventInstance {
    pub trigger_surface: String,
    pub trigger_lemma: String,
    pub bindings: std::collections::BTreeMap<String, crate::ids::EntityId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeRef>,
    pub evidence: Vec<Evidence>,
    pub confidence: f32,
    /// Set when cross-batch alignment matched a historical event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aligned_to: Option<crate::ids::EventId>,
}

impl EventInstance {
    /// Stable fingerprint used by scripted fixtures and batch reports.
    pub fn fingerprint(&self) -> String {
        let roles: Vec<String> = self
            .bindings
            .iter()
            .map(|(role, id)| format!("{role}={}", id.as_str()))
            .collect();
        let time = self.time.as_ref().map_or_else(String::new, |t| t.canonical());
        format!("event|{}|{}|{time}", self.trigger_lemma, roles.join(","))
    }

    pub fn key_args(&self) -> std::collections::BTreeSet<crate::ids::EntityId> {
        self.bindings.values().cloned().collect()
    }
}

/// A schema retrieved into the extraction context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedSchema {
    pub schema_id: SchemaId,
    pub label: String,
    pub kind: String,
    pub score: f32,
}

/// Immutable per-batch context handed to the extraction backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionContext {
    pub schemas: Vec<RetrievedSchema>,
    pub few_shot: String,
}

impl ExtractionContext {
    pub fn cold() -> Self {
        Self { schemas: Vec::new(), few_shot: DEFAULT_FEW_SHOT.to_string() }
    }
}

/// Build the extraction context for a batch. On the cold-start batch the
/// context carries only the few-shot block; afterwards the top-`k` promoted
/// schemas are retrieved with the batch centroid embedding.
pub fn build_context(
    docs: &[Document],
    batch_index: u64,
    mkb: &Mkb,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<ExtractionContext, AdapterError> {
    if batch_index == 0 || docs.is_empty() {
        return Ok(ExtractionContext::cold());
    }
    let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
    let vectors = embedder.embed(&texts)?;
    let centroid = crate::adapters::EmbeddingVector::centroid(&vectors);
    let schemas = mkb
        .retrieve_schemas(&centroid, k)
        .map_err(|e| AdapterError::InvalidInput(e.to_string()))?
        .into_iter()
        .map(|hit| RetrievedSchema {
            schema_id: hit.schema_id,
            label: hit.label,
            kind: hit.kind.to_string(),
            score: hit.score,
        })
        .collect();
    Ok(ExtractionContext { schemas, few_shot: DEFAULT_FEW_SHOT.to_string() })
}

/// Extraction backend: consumes pre-routed statements of one document.
pub trait ExtractionBackend: Send + Sync {
    fn extract_triples(
        &self,
        doc: &Document,
        statements: &[Statement],
        ctx: &ExtractionContext,
    ) -> Result<Vec<TripleCandidate>, AdapterError>;

    fn extract_events(
        &self,
        doc: &Document,
        statements: &[Statement],
        ctx: &ExtractionContext,
    ) -> Result<Vec<EventCandidate>, AdapterError>;
}

/// Output of running extraction over a whole batch.
#[derive(Debug, Clone, Default)]
pub struct BatchExtraction {
    pub triples: Vec<TripleCandidate>,
    pub events: Vec<EventCandidate>,
    /// Documents whose extraction backend failed; recorded, never dropped
    /// silently.
    pub skipped_docs: Vec<String>,
}

/// Extract every document of a batch. Documents run independently (in
/// parallel when enabled); results are aggregated in document order, then
/// span order, regardless of completion order.
pub fn extract_batch(
    docs: &[Document],
    ctx: &ExtractionContext,
    backend: &dyn ExtractionBackend,
    disable_events: bool,
) -> BatchExtraction {
    let per_doc = par::map_slice(docs, |doc| {
        let statements = segment(doc);
        let (static_stmts, event_stmts): (Vec<_>, Vec<_>) = if disable_events {
            (statements, Vec::new())
        } else {
            statements
                .into_iter()
                .partition(|s| route_statement(&s.text) == Track::StaticTriple)
        };
        let triples = backend.extract_triples(doc, &static_stmts, ctx);
        let events = backend.extract_events(doc, &event_stmts, ctx);
        match (triples, events) {
            (Ok(t), Ok(e)) => Ok((t, e)),
            _ => Err(doc.doc_id.clone()),
        }
    });

    let mut out = BatchExtraction::default();
    for result in per_doc {
        match result {
            Ok((mut triples, mut events)) => {
                triples.sort_by_key(|t| (t.head.doc_id.clone(), t.head.offset));
                events.sort_by_key(|e| {
                    (e.evidence.doc_id.clone(), e.role_bindings.first().map_or(0, |(_, m)| m.offset))
                });
                out.triples.extend(triples);
                out.events.extend(events);
            }
            Err(doc_id) => out.skipped_docs.push(doc_id),
        }
    }
    out
}
