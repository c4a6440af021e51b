//! Temporal references attached to events and the compatibility rules used
//! by event matching.
//!
//! Two kinds of references occur in practice: calendar spans (a year or a
//! year range) and release tags (`v1.21`). Spans compare by overlap, tags by
//! equality; a comparison across kinds is undecidable and treated as
//! unknown rather than as a conflict.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A temporal reference carried by an event instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeRef {
    /// Inclusive year span; a single year is a degenerate span.
    Years { start: i32, end: i32 },
    /// A version / release tag such as `v1.21`.
    Version { tag: String },
}

impl TimeRef {
    pub fn year(y: i32) -> Self {
        TimeRef::Years { start: y, end: y }
    }

    pub fn version(tag: impl Into<String>) -> Self {
        TimeRef::Version { tag: tag.into() }
    }

    /// Canonical string form, used in event-id material and exports.
    pub fn canonical(&self) -> String {
        match self {
            TimeRef::Years { start, end } if start == end => format!("{start}"),
            TimeRef::Years { start, end } => format!("{start}..{end}"),
            TimeRef::Version { tag } => tag.clone(),
        }
    }

    /// Parse the canonical form produced by [`TimeRef::canonical`].
    pub fn parse_canonical(s: &str) -> Option<Self> {
        if let Some((a, b)) = s.split_once("..") {
            let (start, end) = (a.parse().ok()?, b.parse().ok()?);
            return Some(TimeRef::Years { start, end });
        }
        if s.chars().all(|c| c.is_ascii_digit()) && !s.is_empty() {
            return s.parse().ok().map(TimeRef::year);
        }
        if s.starts_with('v') && s.len() > 1 {
            return Some(TimeRef::version(s));
        }
        None
    }
}

impl fmt::Display for TimeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Outcome of comparing two (possibly absent) temporal references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeCompat {
    /// Same tag or overlapping spans.
    Compatible,
    /// Provably different times; a hard gate for event alignment.
    Disjoint,
    /// At least one side is missing or the kinds are incomparable.
    Unknown,
}

impl TimeCompat {
    /// Score contribution used by the weighted event-match formula.
    pub fn score(self) -> f32 {
        match self {
            TimeCompat::Compatible => 1.0,
            TimeCompat::Unknown => 0.5,
            TimeCompat::Disjoint => 0.0,
        }
    }

    pub fn is_disjoint(self) -> bool {
        matches!(self, TimeCompat::Disjoint)
    }
}

/// Compare two optional temporal references.
pub fn compatibility(a: Option<&TimeRef>, b: Option<&TimeRef>) -> TimeCompat {
    match (a, b) {
        (Some(TimeRef::Years { start: s1, end: e1 }), Some(TimeRef::Years { start: s2, end: e2 })) => {
            if s1 <= e2 && s2 <= e1 {
                TimeCompat::Compatible
            } else {
                TimeCompat::Disjoint
            }
        }
        (Some(TimeRef::Version { tag: t1 }), Some(TimeRef::Version { tag: t2 })) => {
            if t1 == t2 {
                TimeCompat::Compatible
            } else {
                TimeCompat::Disjoint
            }
        }
        (Some(_), Some(_)) => TimeCompat::Unknown,
        _ => TimeCompat::Unknown,
    }
}

/// Intersection of two compatible year spans; used when merging event
/// instances. Returns the narrower window they agree on.
pub fn intersect(a: &TimeRef, b: &TimeRef) -> Option<TimeRef> {
    match (a, b) {
        (TimeRef::Years { start: s1, end: e1 }, TimeRef::Years { start: s2, end: e2 }) => {
            let start = *s1.max(s2);
            let end = *e1.min(e2);
            (start <= end).then_some(TimeRef::Years { start, end })
        }
        (TimeRef::Version { tag: t1 }, TimeRef::Version { tag: t2 }) if t1 == t2 => {
            Some(a.clone())
        }
        _ => None,
    }
}
