//! Pipeline configuration.
//!
//! Every threshold the pipeline consults is declared here with its default
//! and can be overridden from a TOML file. CLI flags (retrieval `k`,
//! backend kind, ablation switches) override the file.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config file {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("invalid config value: {0}")]
    Invalid(String),
}

/// Similarity / promotion thresholds and retrieval sizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Single-link clustering threshold for mention and label embeddings.
    pub tau_cluster: f32,
    /// Minimum mean pairwise cosine for a schema proposal cluster.
    pub tau_coherence: f32,
    /// Minimum relation-label similarity for a deprecation target.
    pub tau_target: f32,
    /// Minimum cluster frequency for schema promotion.
    pub theta: u32,
    /// Top-K schemas injected into the extraction context.
    pub retrieval_k: usize,
    /// A promoted event-schema role is required when bound in at least this
    /// fraction of member instances.
    pub required_role_ratio: f32,
    /// Weighted event-match score needed to align two event instances.
    pub event_align_threshold: f32,
    /// Embedding similarity at which the mock adjudicator confirms reuse of
    /// a historical entity id without an exact alias match.
    pub reuse_confirm_threshold: f32,
    /// Candidate profiles retrieved per cluster during cross-batch
    /// alignment.
    pub entity_match_candidates: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            tau_cluster: 0.85,
            tau_coherence: 0.80,
            tau_target: 0.80,
            theta: 3,
            retrieval_k: 30,
            required_role_ratio: 0.8,
            event_align_threshold: 0.8,
            reuse_confirm_threshold: 0.95,
            entity_match_candidates: 5,
        }
    }
}

/// Weights of the event-match score components. They are normalized at use
/// so the three parts always sum to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventMatchWeights {
    pub trigger: f32,
    pub arguments: f32,
    pub time: f32,
}

impl Default for EventMatchWeights {
    fn default() -> Self {
        Self { trigger: 0.5, arguments: 0.3, time: 0.2 }
    }
}

impl EventMatchWeights {
    pub fn normalized(&self) -> (f32, f32, f32) {
        let sum = self.trigger + self.arguments + self.time;
        if sum <= 0.0 {
            (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
        } else {
            (self.trigger / sum, self.arguments / sum, self.time / sum)
        }
    }
}

/// Governance lexicons and judge settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GovernanceConfig {
    /// Relations rejected when head equals tail.
    pub irreflexive: Vec<String>,
    /// Relations rejected when the inverse pair is already asserted.
    pub anti_symmetric: Vec<String>,
    /// Trigger lemmas that short-circuit intent classification to
    /// `Evolutionary`.
    pub evolutionary_triggers: Vec<String>,
    /// Sampling temperature for judge calls.
    pub judge_temperature: f32,
}

impl Default for GovernanceConfig {
    fn default() -> Self {
        Self {
            irreflexive: vec![
                "ancestor_of".into(),
                "part_of".into(),
                "parent_of".into(),
                "succeeded_by".into(),
            ],
            anti_symmetric: vec![
                "ancestor_of".into(),
                "part_of".into(),
                "parent_of".into(),
                "succeeded_by".into(),
            ],
            evolutionary_triggers: vec![
                "deprecate".into(),
                "remove".into(),
                "replace".into(),
                "discontinue".into(),
                "supersede".into(),
            ],
            judge_temperature: 0.1,
        }
    }
}

/// Which backend family serves generation, judging, and embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Deterministic rule-based backends; the default for tests and replay.
    Mock,
    /// Chat-completion HTTP backends configured in `[backend.http]`.
    Http,
}

/// HTTP backend settings. The API key is read from the environment variable
/// named here, never from the config file itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    pub model: String,
    pub judge_model: String,
    pub embedding_model: String,
    pub api_key_env: String,
    pub timeout_ms: u64,
    /// Transport attempts (exponential backoff between them).
    pub retries: u32,
    /// Maximum concurrent in-flight requests.
    pub concurrency: usize,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8080/v1".into(),
            model: "generation-model".into(),
            judge_model: "judge-model".into(),
            embedding_model: "embedding-model".into(),
            api_key_env: "EVOGRAPH_API_KEY".into(),
            timeout_ms: 30_000,
            retries: 3,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Directory holding prompt template files.
    pub templates_dir: PathBuf,
    /// Optional scripted-fixture files layered over the mock backends
    /// (judge verdicts, adjudicator verdicts, evaluator verdicts, chat
    /// responses).
    pub fixtures: Vec<PathBuf>,
    pub http: HttpBackendConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            templates_dir: PathBuf::from("templates"),
            fixtures: Vec::new(),
            http: HttpBackendConfig::default(),
        }
    }
}

/// Stage-level ablation switches.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Treat every event as informational; nothing is ever deprecated.
    pub disable_intent: bool,
    /// Route everything to the triple track.
    pub disable_events: bool,
    /// Skip cross-batch alignment for entities and events.
    pub disable_cross_batch_coref: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub thresholds: Thresholds,
    pub event_match_weights: EventMatchWeights,
    pub governance: GovernanceConfig,
    pub backend: BackendConfig,
    pub ablation: AblationConfig,
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: PipelineConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.thresholds;
        for (name, v) in [
            ("tau_cluster", t.tau_cluster),
            ("tau_coherence", t.tau_coherence),
            ("tau_target", t.tau_target),
            ("required_role_ratio", t.required_role_ratio),
            ("event_align_threshold", t.event_align_threshold),
            ("reuse_confirm_threshold", t.reuse_confirm_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if t.theta < 1 {
            return Err(ConfigError::Invalid("theta must be at least 1".into()));
        }
        if t.retrieval_k < 1 {
            return Err(ConfigError::Invalid("retrieval_k must be at least 1".into()));
        }
        if t.entity_match_candidates < 1 {
            return Err(ConfigError::Invalid(
                "entity_match_candidates must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// True when a relation must never connect an entity to itself.
    pub fn is_irreflexive(&self, relation: &str) -> bool {
        self.governance.irreflexive.iter().any(|r| r == relation)
    }

    /// True when asserting both orientations of a relation is contradictory.
    pub fn is_anti_symmetric(&self, relation: &str) -> bool {
        self.governance.anti_symmetric.iter().any(|r| r == relation)
    }

    /// True when a trigger lemma marks a state transition of existing
    /// knowledge.
    pub fn is_evolutionary_trigger(&self, lemma: &str) -> bool {
        self.governance.evolutionary_triggers.iter().any(|t| t == lemma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn default_retrieval_k_is_thirty() {
        assert_eq!(PipelineConfig::default().thresholds.retrieval_k, 30);
    }

    #[test]
    fn default_judge_temperature() {
        let cfg = PipelineConfig::default();
        assert!((cfg.governance.judge_temperature - 0.1).abs() < f32::EPSILON);
    }

    #[test]
    fn toml_overrides_defaults() {
        let cfg: PipelineConfig = toml::from_str(
            r#"
            [thresholds]
            theta = 5
            [ablation]
            disable_intent = true
            "#,
        )
        .unwrap();
        assert_eq!(cfg.thresholds.theta, 5);
        assert!(cfg.ablation.disable_intent);
        assert_eq!(cfg.thresholds.retrieval_k, 30);
    }

    #[test]
    fn out_of_range_threshold_rejected() {
        let cfg: PipelineConfig =
            toml::from_str("[thresholds]\ntau_cluster = 1.5\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn weights_normalize() {
        let w = EventMatchWeights { trigger: 1.0, arguments: 1.0, time: 2.0 };
        let (t, a, m) = w.normalized();
        assert!((t - 0.25).abs() < 1e-6);
        assert!((a - 0.25).abs() < 1e-6);
        assert!((m - 0.5).abs() < 1e-6);
    }
}
