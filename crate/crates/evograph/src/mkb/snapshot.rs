//! MKB persistence: line-delimited JSON records partitioned into sections.
//!
//! ```text
//! [meta]
//! {"version":1}
//! [profiles]
//! {...}
//! [relation_schemas]
//! ...
//! [event_schemas]
//! ...
//! [proposals]
//! ...
//! [events]
//! ...
//! ```
//!
//! Records inside each section are ordered by id (proposals keep pool
//! order), so equal stores serialize to equal bytes.

use super::{Mkb, MkbError};
use crate::jsonl::canonical_line;
use serde::Serialize;

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, serde::Deserialize)]
struct Meta {
    version: u32,
}

pub(super) fn snapshot(mkb: &Mkb) -> Vec<u8> {
    let mut out = String::new();
    let mut section = |name: &str| {
        out.push('[');
        out.push_str(name);
        out.push_str("]\n");
    };

    section("meta");
    out.push_str(&canonical_line(&Meta { version: FORMAT_VERSION }));
    out.push('\n');

    out.push_str("[profiles]\n");
    for p in mkb.profiles.values() {
        out.push_str(&canonical_line(p));
        out.push('\n');
    }
    out.push_str("[relation_schemas]\n");
    for s in mkb.relation_schemas.values() {
        out.push_str(&canonical_line(s));
        out.push('\n');
    }
    out.push_str("[event_schemas]\n");
    for s in mkb.event_schemas.values() {
        out.push_str(&canonical_line(s));
        out.push('\n');
    }
    out.push_str("[proposals]\n");
    for p in &mkb.proposals {
        out.push_str(&canonical_line(p));
        out.push('\n');
    }
    out.push_str("[events]\n");
    for e in mkb.event_index.values() {
        out.push_str(&canonical_line(e));
        out.push('\n');
    }
    out.into_bytes()
}

pub(super) fn restore(bytes: &[u8]) -> Result<Mkb, MkbError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| MkbError::CorruptSnapshot(format!("not utf-8: {e}")))?;

    let mut mkb = Mkb::new();
    let mut section: Option<String> = None;
    let mut saw_meta = false;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.to_string());
            continue;
        }
        let corrupt = |e: serde_json::Error| {
            MkbError::CorruptSnapshot(format!("line {}: {e}", lineno + 1))
        };
        match section.as_deref() {
            Some("meta") => {
                let meta: Meta = serde_json::from_str(line).map_err(corrupt)?;
                if meta.version != FORMAT_VERSION {
                    return Err(MkbError::CorruptSnapshot(format!(
                        "unsupported format version {}",
                        meta.version
                    )));
                }
                saw_meta = true;
            }
            Some("profiles") => {
                let p: super::EntityProfile = serde_json::from_str(line).map_err(corrupt)?;
                mkb.upsert_entity_profile(p);
            }
            Some("relation_schemas") => {
                let s: super::RelationSchema = serde_json::from_str(line).map_err(corrupt)?;
                mkb.register_relation_schema(s)
                    .map_err(|e| MkbError::CorruptSnapshot(e.to_string()))?;
            }
            Some("event_schemas") => {
                let s: super::EventSchema = serde_json::from_str(line).map_err(corrupt)?;
                mkb.register_event_schema(s)
                    .map_err(|e| MkbError::CorruptSnapshot(e.to_string()))?;
            }
            Some("proposals") => {
                let p: super::SchemaProposal = serde_json::from_str(line).map_err(corrupt)?;
                mkb.stash_proposal(p);
            }
            Some("events") => {
                let e: super::IndexedEvent = serde_json::from_str(line).map_err(corrupt)?;
                mkb.register_event(e);
            }
            Some(other) => {
                return Err(MkbError::CorruptSnapshot(format!("unknown section [{other}]")))
            }
            None => {
                return Err(MkbError::CorruptSnapshot(
                    "record appears before any section header".into(),
                ))
            }
        }
    }
    if !saw_meta {
        return Err(MkbError::CorruptSnapshot("missing [meta] section".into()));
    }
    Ok(mkb)
}
