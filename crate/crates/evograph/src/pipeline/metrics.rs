//! Incremental and static quality metrics.
//!
//! Additions are scored by a judgment file: only `fully_supported` counts
//! as correct. Deprecation-handling precision is the fraction of soft
//! deprecations whose deletion was judged justified. Either metric is N/A
//! when its denominator set is empty. Static precision/recall/F1 compare
//! canonicalized triples against a gold set.

use super::report::BatchReport;
use crate::ids::EdgeId;
use crate::mkb::normalize_relation_label;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("no judgment for id {0}")]
    MissingJudgment(EdgeId),
    #[error("malformed judgments file: {0}")]
    MalformedJudgments(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportJudgment {
    FullySupported,
    PartiallySupported,
    NotSupported,
}

/// Judgments covering a report: support labels for additions and
/// deletion-justification flags for deprecations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Judgments {
    pub support: BTreeMap<EdgeId, SupportJudgment>,
    pub deletion: BTreeMap<EdgeId, bool>,
}

#[derive(Serialize, Deserialize)]
struct JudgmentLine {
    id: EdgeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support: Option<SupportJudgment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deletion_justified: Option<bool>,
}

impl Judgments {
    /// Parse line-delimited judgment records:
    /// `{"id": ..., "support": "fully_supported"}` or
    /// `{"id": ..., "deletion_justified": true}`.
    pub fn parse(text: &str) -> Result<Self, MetricError> {
        let mut out = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: JudgmentLine = serde_json::from_str(line).map_err(|e| {
                MetricError::MalformedJudgments(format!("line {}: {e}", lineno + 1))
            })?;
            if let Some(s) = rec.support {
                out.support.insert(rec.id.clone(), s);
            }
            if let Some(d) = rec.deletion_justified {
                out.deletion.insert(rec.id, d);
            }
        }
        Ok(out)
    }

    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (id, support) in &self.support {
            out.push_str(&crate::jsonl::canonical_line(&JudgmentLine {
                id: id.clone(),
                support: Some(*support),
                deletion_justified: self.deletion.get(id).copied(),
            }));
            out.push('\n');
        }
        for (id, justified) in &self.deletion {
            if self.support.contains_key(id) {
                continue;
            }
            out.push_str(&crate::jsonl::canonical_line(&JudgmentLine {
                id: id.clone(),
                support: None,
                deletion_justified: Some(*justified),
            }));
            out.push('\n');
        }
        out
    }
}

/// Metric values; `None` encodes N/A.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dhp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
}

/// Fraction of this batch's additions judged fully supported; N/A when the
/// batch added nothing.
pub fn delta_precision(
    report: &BatchReport,
    judgments: &Judgments,
) -> Result<MetricResult, MetricError> {
    if report.additions.is_empty() {
        return Ok(MetricResult::default());
    }
    let mut fully = 0usize;
    for id in &report.additions {
        match judgments.support.get(id) {
            Some(SupportJudgment::FullySupported) => fully += 1,
            Some(_) => {}
            None => return Err(MetricError::MissingJudgment(id.clone())),
        }
    }
    Ok(MetricResult {
        delta_precision: Some(fully as f64 / report.additions.len() as f64),
        ..Default::default()
    })
}

/// Fraction of this batch's soft deprecations judged justified; N/A when
/// nothing was deprecated.
pub fn dhp(report: &BatchReport, judgments: &Judgments) -> Result<MetricResult, MetricError> {
    if report.deprecations.is_empty() {
        return Ok(MetricResult::default());
    }
    let mut justified = 0usize;
    for (id, _) in &report.deprecations {
        match judgments.deletion.get(id) {
            Some(true) => justified += 1,
            Some(false) => {}
            None => return Err(MetricError::MissingJudgment(id.clone())),
        }
    }
    Ok(MetricResult {
        dhp: Some(justified as f64 / report.deprecations.len() as f64),
        ..Default::default()
    })
}

/// A canonicalized triple for static scoring: head and tail lowercased,
/// relation label normalized.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl CanonTriple {
    pub fn new(head: &str, relation: &str, tail: &str) -> Self {
        Self {
            head: head.trim().to_lowercase(),
            relation: normalize_relation_label(relation),
            tail: tail.trim().to_lowercase(),
        }
    }
}

/// Standard precision / recall / F1 with the exact canonical-equality
/// matcher. Empty predictions make precision N/A while recall is 0 against
/// a non-empty gold set.
pub fn static_prf(predicted: &[CanonTriple], gold: &[CanonTriple]) -> MetricResult {
    static_prf_with(predicted, gold, |a, b| a == b)
}

/// Same scoring with a pluggable matcher (for judge-based matching).
pub fn static_prf_with<F>(
    predicted: &[CanonTriple],
    gold: &[CanonTriple],
    matches: F,
) -> MetricResult
where
    F: Fn(&CanonTriple, &CanonTriple) -> bool,
{
    let predicted: BTreeSet<&CanonTriple> = predicted.iter().collect();
    let gold: BTreeSet<&CanonTriple> = gold.iter().collect();

    let matched_predicted =
        predicted.iter().filter(|p| gold.iter().any(|g| matches(p, g))).count();
    let matched_gold = gold.iter().filter(|g| predicted.iter().any(|p| matches(p, g))).count();

    let precision = (!predicted.is_empty())
        .then(|| matched_predicted as f64 / predicted.len() as f64);
    let recall = (!gold.is_empty()).then(|| matched_gold as f64 / gold.len() as f64);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    MetricResult { precision, recall, f1, ..Default::default() }
}
