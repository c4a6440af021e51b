//! Pluggable generation, judging, and embedding backends.
//!
//! Pipeline stages depend on role traits (extraction backend, judge,
//! adjudicator, type inferencer, schema evaluator — each declared next to
//! its consumer) plus the [`Embedder`] and [`ChatBackend`] primitives
//! declared here. Two families implement them:
//!
//! - [`mock`] — deterministic rule-based backends, optionally overridden by
//!   scripted fixture tables. The whole pipeline becomes a pure function of
//!   its inputs.
//! - [`llm`] over [`http`] — prompt-template-driven backends speaking an
//!   open chat-completion wire contract.
//!
//! Swapping families is a configuration change; nothing outside this module
//! knows which one is active.

pub mod http;
pub mod llm;
pub mod mock;
pub mod templates;

use crate::config::{BackendKind, PipelineConfig};
use crate::extract::ExtractionBackend;
use crate::govern::Judge;
use crate::normalize::{PairAdjudicator, TypeInferencer};
use crate::schema::SchemaEvaluator;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no fixture for fingerprint {0}")]
    FixtureMiss(String),
    #[error("unknown template {0}")]
    TemplateNotFound(String),
    #[error("template {template} is missing a binding for {{{{{placeholder}}}}}")]
    MissingPlaceholder { template: String, placeholder: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// An L2-normalized embedding; cosine similarity reduces to a dot product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    /// Normalize on ingestion. A zero vector stays zero and is orthogonal
    /// to everything.
    pub fn new(mut values: Vec<f32>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f32>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        Self { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Cosine similarity; both vectors are unit length (or zero), so this
    /// is a plain dot product.
    pub fn cosine(&self, other: &EmbeddingVector) -> f32 {
        debug_assert_eq!(self.dimension(), other.dimension());
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    /// Unnormalized mean of several vectors, renormalized. Summation is
    /// sequential in input order so results do not depend on thread count.
    pub fn centroid(vectors: &[EmbeddingVector]) -> EmbeddingVector {
        let dim = vectors.first().map_or(0, |v| v.dimension());
        let mut sum = vec![0.0f32; dim];
        for v in vectors {
            for (acc, x) in sum.iter_mut().zip(v.values()) {
                *acc += x;
            }
        }
        EmbeddingVector::new(sum)
    }
}

/// Text-embedding provider with a fixed declared dimension.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    /// Embed a batch; order is preserved and identical inputs embed
    /// identically.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, AdapterError>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, AdapterError> {
        Ok(self.embed(std::slice::from_ref(&text.to_string()))?.remove(0))
    }
}

/// Shape descriptor for a structured chat response: the JSON object fields
/// the caller requires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseShape {
    pub required_fields: Vec<String>,
}

impl ResponseShape {
    pub fn of(fields: &[&str]) -> Self {
        Self { required_fields: fields.iter().map(|s| s.to_string()).collect() }
    }

    pub fn validate(&self, fields: &BTreeMap<String, serde_json::Value>) -> Result<(), String> {
        for f in &self.required_fields {
            if !fields.contains_key(f) {
                return Err(format!("response is missing field `{f}`"));
            }
        }
        Ok(())
    }
}

/// One structured generation/judge call.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub template_id: String,
    pub bindings: BTreeMap<String, String>,
    pub temperature: f32,
    pub response_shape: ResponseShape,
}

impl ChatRequest {
    pub fn new(template_id: &str, temperature: f32, shape: ResponseShape) -> Self {
        Self {
            template_id: template_id.to_string(),
            bindings: BTreeMap::new(),
            temperature,
            response_shape: shape,
        }
    }

    pub fn bind(mut self, key: &str, value: impl Into<String>) -> Self {
        self.bindings.insert(key.to_string(), value.into());
        self
    }

    /// Stable fingerprint of (template id, bindings); the mock chat backend
    /// resolves fixtures by this key.
    pub fn fingerprint(&self) -> String {
        let mut material = String::new();
        for (k, v) in &self.bindings {
            material.push_str(k);
            material.push('\u{1f}');
            material.push_str(v);
            material.push('\u{1e}');
        }
        format!("chat|{}|{}", self.template_id, crate::ids::short_hash(&material, 16))
    }
}

/// Structured response: parsed fields plus the raw text they came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatResponse {
    pub fields: BTreeMap<String, serde_json::Value>,
    pub raw: String,
    pub tokens_used: Option<u64>,
}

impl ChatResponse {
    pub fn str_field(&self, name: &str) -> Option<&str> {
        self.fields.get(name).and_then(|v| v.as_str())
    }

    pub fn bool_field(&self, name: &str) -> Option<bool> {
        self.fields.get(name).and_then(|v| v.as_bool())
    }
}

/// Carrier for every generation / judging call.
pub trait ChatBackend: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, AdapterError>;
}

/// A loaded scripted-fixture table: `key<TAB>value` lines, `#` comments.
#[derive(Debug, Clone, Default)]
pub struct FixtureTable {
    entries: BTreeMap<String, String>,
}

impl FixtureTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn parse(text: &str) -> Result<Self, AdapterError> {
        let mut table = Self::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('\t').ok_or_else(|| {
                AdapterError::InvalidInput(format!(
                    "fixture line {} has no tab separator",
                    lineno + 1
                ))
            })?;
            table.insert(key, value);
        }
        Ok(table)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, AdapterError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            AdapterError::InvalidInput(format!("cannot read fixture {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Merge several fixture files; later files win on key collisions.
    pub fn load_all(paths: &[std::path::PathBuf]) -> Result<Self, AdapterError> {
        let mut merged = Self::new();
        for p in paths {
            let t = Self::load(p)?;
            merged.entries.extend(t.entries);
        }
        Ok(merged)
    }
}

/// The full set of backends a pipeline run needs.
#[derive(Clone)]
pub struct Backends {
    pub embedder: Arc<dyn Embedder>,
    pub extractor: Arc<dyn ExtractionBackend>,
    pub judge: Arc<dyn Judge>,
    pub adjudicator: Arc<dyn PairAdjudicator>,
    pub typer: Arc<dyn TypeInferencer>,
    pub evaluator: Arc<dyn SchemaEvaluator>,
}

impl Backends {
    /// Deterministic mock backends, optionally layered with scripted
    /// fixtures from the config.
    pub fn mock(cfg: &PipelineConfig) -> Result<Self, AdapterError> {
        let fixtures = Arc::new(FixtureTable::load_all(&cfg.backend.fixtures)?);
        Ok(Self {
            embedder: Arc::new(mock::MockEmbedder::default()),
            extractor: Arc::new(mock::MockExtractor::new()),
            judge: Arc::new(mock::MockJudge::new(fixtures.clone())),
            adjudicator: Arc::new(mock::MockAdjudicator::new(
                fixtures.clone(),
                cfg.thresholds.reuse_confirm_threshold,
            )),
            typer: Arc::new(mock::MockTypeInferencer::new(fixtures.clone())),
            evaluator: Arc::new(mock::MockEvaluator::new(fixtures)),
        })
    }

    /// Chat-completion backends over HTTP, driven by prompt templates.
    pub fn http(cfg: &PipelineConfig) -> Result<Self, AdapterError> {
        let store = Arc::new(templates::TemplateStore::load(&cfg.backend.templates_dir)?);
        let chat: Arc<dyn ChatBackend> =
            Arc::new(http::HttpChatBackend::new(&cfg.backend.http, store)?);
        let embedder = Arc::new(http::HttpEmbedder::new(&cfg.backend.http)?);
        let judge_temp = cfg.governance.judge_temperature;
        Ok(Self {
            embedder,
            extractor: Arc::new(llm::LlmExtractor::new(chat.clone())),
            judge: Arc::new(llm::LlmJudge::new(chat.clone(), judge_temp)),
            adjudicator: Arc::new(llm::LlmAdjudicator::new(chat.clone())),
            typer: Arc::new(llm::LlmTypeInferencer::new(chat.clone())),
            evaluator: Arc::new(llm::LlmEvaluator::new(chat)),
        })
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, AdapterError> {
        match cfg.backend.kind {
            BackendKind::Mock => Self::mock(cfg),
            BackendKind::Http => Self::http(cfg),
        }
    }
}
