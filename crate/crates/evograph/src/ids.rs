//! Deterministic identifiers for entities, edges, events, and schemas.
//!
//! Every identifier is a pure function of its inputs so that repeated runs
//! over the same stream mint the same ids. Edge ids hash the canonical
//! (head, relation, tail) so re-asserting a known fact maps onto the
//! existing edge instead of creating a duplicate.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

macro_rules! display_impl {
    ($name:ident) => {
        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

macro_rules! simple_id {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        display_impl!($name);

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

simple_id!(
    /// Canonical entity identifier. Opaque, unique within the graph, never
    /// reassigned after creation.
    EntityId
);
simple_id!(
    /// Canonical fact-edge identifier, derived from (head, relation, tail).
    EdgeId
);
simple_id!(
    /// Identifier of a promoted relation or event schema.
    SchemaId
);
simple_id!(
    /// Identifier of a canonical (reified) event node.
    EventId
);

/// Hex digest of `input`, truncated to `n` characters.
pub fn short_hash(input: &str, n: usize) -> String {
    let digest = Sha256::digest(input.as_bytes());
    let mut out = String::with_capacity(n);
    for byte in digest.iter() {
        if out.len() >= n {
            break;
        }
        out.push_str(&format!("{byte:02x}"));
    }
    out.truncate(n);
    out
}

/// Lowercase slug: alphanumerics kept, every other run of characters
/// collapsed to a single underscore.
pub fn slugify(text: &str) -> String {
    let mut slug = String::with_capacity(text.len());
    let mut pending_sep = false;
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() {
            if pending_sep && !slug.is_empty() {
                slug.push('_');
            }
            pending_sep = false;
            slug.push(ch.to_ascii_lowercase());
        } else {
            pending_sep = true;
        }
    }
    if slug.is_empty() {
        slug.push('x');
    }
    slug
}

/// Mint an entity id for a newly discovered entity.
///
/// The id embeds the batch index so that, with cross-batch alignment
/// disabled, a recurring mention fragments into per-batch nodes instead of
/// silently colliding with its historical id.
pub fn mint_entity_id(canonical_mention: &str, entity_type: &str, batch_index: u64) -> EntityId {
    let h = short_hash(&format!("{canonical_mention}\u{1f}{entity_type}"), 8);
    EntityId(format!("{}.b{batch_index}.{h}", slugify(canonical_mention)))
}

/// Mint the id of a reified event node from its canonical content.
pub fn mint_event_id(
    trigger_lemma: &str,
    bindings: &[(String, EntityId)],
    time_key: Option<&str>,
) -> EventId {
    let mut material = String::from(trigger_lemma);
    let mut sorted: Vec<_> = bindings.to_vec();
    sorted.sort();
    for (role, entity) in &sorted {
        material.push('\u{1f}');
        material.push_str(role);
        material.push('=');
        material.push_str(entity.as_str());
    }
    if let Some(t) = time_key {
        material.push('\u{1f}');
        material.push_str(t);
    }
    EventId(format!("evt.{}", short_hash(&material, 16)))
}

/// Derive the canonical edge id from the already-canonicalized triple.
pub fn edge_id(head: &EntityId, relation: &str, tail_kind: &str, tail_value: &str) -> EdgeId {
    let material = format!(
        "{}\u{1f}{relation}\u{1f}{tail_kind}\u{1f}{tail_value}",
        head.as_str()
    );
    EdgeId(format!("f.{}", short_hash(&material, 16)))
}

/// Derive a schema id from its kind and canonical label.
pub fn schema_id(kind: &str, label: &str) -> SchemaId {
    SchemaId(format!("s.{kind}.{}", slugify(label)))
}
