//! HTTP backends speaking an open chat-completion wire contract.
//!
//! Requests go to `{endpoint}/chat/completions` as a message list; the
//! assistant reply must be a JSON object matching the requested response
//! shape. Transport failures retry with exponential backoff up to the
//! configured attempt count; a response that fails shape validation is
//! re-requested once and then surfaces as backend unavailability. The API
//! key is read from the environment variable named in the config, and a
//! counting semaphore caps concurrent in-flight requests.

use super::templates::TemplateStore;
use super::{AdapterError, ChatBackend, ChatRequest, ChatResponse, Embedder, EmbeddingVector};
use crate::config::HttpBackendConfig;
use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::time::Duration;

/// Minimal counting semaphore; fair enough for a client-side cap.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self { permits: Mutex::new(permits.max(1)), available: Condvar::new() }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }

    fn release(&self) {
        let mut permits = self.permits.lock().expect("semaphore lock");
        *permits += 1;
        self.available.notify_one();
    }
}

struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        self.semaphore.release();
    }
}

fn backoff_delay(attempt: u32) -> Duration {
    Duration::from_millis(100u64.saturating_mul(1 << attempt.min(6)))
}

pub struct HttpChatBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    judge_model: String,
    api_key: Option<String>,
    retries: u32,
    templates: Arc<TemplateStore>,
    semaphore: Semaphore,
}

impl HttpChatBackend {
    pub fn new(
        cfg: &HttpBackendConfig,
        templates: Arc<TemplateStore>,
    ) -> Result<Self, AdapterError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| AdapterError::BackendUnavailable(format!("client build failed: {e}")))?;
        Ok(Self {
            client,
            endpoint: cfg.endpoint.trim_end_matches('/').to_string(),
            model: cfg.model.clone(),
            judge_model: cfg.judge_model.clone(),
            api_key: std::env::var(&cfg.api_key_env).ok(),
            retries: cfg.retries.max(1),
            templates,
            semaphore: Semaphore::new(cfg.concurrency),
        })
    }

    fn model_for(&self, template_id: &str) -> &str {
        if template_id.starts_with("judge_") {
            &self.judge_model
        } else {
            &self.model
        }
    }

    fn post_once(&self, request: &ChatRequest, prompt: &str) -> Result<String, String> {
        let body = serde_json::json!({
            "model": self.model_for(&request.template_id),
            "temperature": request.temperature,
            "messages": [
                {"role": "system", "content": "Reply with a single JSON object and nothing else."},
                {"role": "user", "content": prompt},
            ],
        });
        let mut builder = self
            .client
            .post(format!("{}/chat/completions", self.endpoint))
            .json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| format!("transport: {e}"))?;
        let status = response.status();
        if !status.is_success() {
            return Err(format!("status {status}"));
        }
        let payload: serde_json::Value =
            response.json().map_err(|e| format!("body decode: {e}"))?;
        payload
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| "response carries no message content".to_string())
    }

    /// One transport-level exchange with backoff across attempts.
    fn exchange(&self, request: &ChatRequest, prompt: &str) -> Result<String, AdapterError> {
        let _guard = self.semaphore.acquire();
        let mut last_error = String::new();
        for attempt in 0..self.retries {
            if attempt > 0 {
                std::thread::sleep(backoff_delay(attempt - 1));
            }
            match self.post_once(request, prompt) {
                Ok(content) => return Ok(content),
                Err(e) => last_error = e,
            }
        }
        Err(AdapterError::BackendUnavailable(format!(
            "{} attempts failed; last error: {last_error}",
            self.retries
        )))
    }

    fn parse_content(
        request: &ChatRequest,
        content: &str,
    ) -> Result<ChatResponse, String> {
        let fields: BTreeMap<String, serde_json::Value> =
            serde_json::from_str(content.trim()).map_err(|e| format!("not a JSON object: {e}"))?;
        request.response_shape.validate(&fields)?;
        Ok(ChatResponse { fields, raw: content.to_string(), tokens_used: None })
    }
}

impl ChatBackend for HttpChatBackend {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, AdapterError> {
        let prompt = self.templates.render(&request.template_id, &request.bindings)?;
        let content = self.exchange(request, &prompt)?;
        match Self::parse_content(request, &content) {
            Ok(response) => Ok(response),
            Err(first_reason) => {
                // one shape-level retry, then give up loudly
                let content = self.exchange(request, &prompt)?;
                Self::parse_content(request, &content).map_err(|second_reason| {
                    AdapterError::BackendUnavailable(format!(
                        "response failed shape validation twice: {first_reason}; then: {second_reason}"
                    ))
                })
            }
        }
    }
}

pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    retries: u32,
    dimension: OnceLock<usize>,
    semaphore: Semaphore,
}

impl HttpEmbedder {
    pub fn new(cfg: &HttpBackendConfig) -> Result<Self, AdapterError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| AdapterError::BackendUnavailable(format!("client build failed: {e}")))?;
        Ok(Self {
            client,
            endpoint: cfg.endpoint.trim_end_matches('/').to_string(),
            model: cfg.embedding_model.clone(),
            api_key: std::env::var(&cfg.api_key_env).ok(),
            retries: cfg.retries.max(1),
            dimension: OnceLock::new(),
            semaphore: Semaphore::new(cfg.concurrency),
        })
    }

    fn post_once(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, String> {
        let body = serde_json::json!({ "model": self.model, "input": texts });
        let mut builder = self.client.post(format!("{}/embeddings", self.endpoint)).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| format!("transport: {e}"))?;
        let status = response.status();
        if !status.is_success() {
            return Err(format!("status {status}"));
        }
        let payload: serde_json::Value =
            response.json().map_err(|e| format!("body decode: {e}"))?;
        let data = payload
            .get("data")
            .and_then(|v| v.as_array())
            .ok_or("response carries no data array")?;
        let mut out = Vec::with_capacity(data.len());
        for item in data {
            let values: Vec<f32> = item
                .get("embedding")
                .and_then(|v| v.as_array())
                .ok_or("entry carries no embedding")?
                .iter()
                .filter_map(|x| x.as_f64().map(|f| f as f32))
                .collect();
            out.push(EmbeddingVector::new(values));
        }
        if out.len() != texts.len() {
            return Err(format!("asked for {} embeddings, got {}", texts.len(), out.len()));
        }
        Ok(out)
    }
}

impl Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dimension.get().copied().unwrap_or(0)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, AdapterError> {
        if texts.iter().any(|t| t.is_empty()) {
            return Err(AdapterError::InvalidInput("cannot embed an empty string".into()));
        }
        let _guard = self.semaphore.acquire();
        let mut last_error = String::new();
        for attempt in 0..self.retries {
            if attempt > 0 {
                std::thread::sleep(backoff_delay(attempt - 1));
            }
            match self.post_once(texts) {
                Ok(vectors) => {
                    if let Some(first) = vectors.first() {
                        let _ = self.dimension.set(first.dimension());
                        if let Some(expected) = self.dimension.get() {
                            if let Some(bad) =
                                vectors.iter().find(|v| v.dimension() != *expected)
                            {
                                return Err(AdapterError::BackendUnavailable(format!(
                                    "provider changed embedding dimension: {} vs {expected}",
                                    bad.dimension()
                                )));
                            }
                        }
                    }
                    return Ok(vectors);
                }
                Err(e) => last_error = e,
            }
        }
        Err(AdapterError::BackendUnavailable(format!(
            "{} attempts failed; last error: {last_error}",
            self.retries
        )))
    }
}
