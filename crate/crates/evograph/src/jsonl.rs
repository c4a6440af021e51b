//! Canonical line-delimited JSON helpers.
//!
//! Records are serialized through `serde_json::Value`, whose object map is
//! ordered, so keys always appear sorted and equal states produce equal
//! bytes.

use serde::Serialize;

/// Serialize one record as a canonical JSON line (sorted keys, no trailing
/// newline).
pub fn canonical_line<T: Serialize>(record: &T) -> String {
    let value = serde_json::to_value(record).expect("record serializes");
    value.to_string()
}

/// Canonical pretty JSON document for report-style files (sorted keys,
/// trailing newline).
pub fn canonical_document<T: Serialize>(record: &T) -> String {
    let value = serde_json::to_value(record).expect("record serializes");
    let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
    text.push('\n');
    text
}
