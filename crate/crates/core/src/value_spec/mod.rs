//! Value theory specifications.
//!
//! A [`ValueTheory`] is the machine-interpretable description of a value
//! framework: an ordered list of [`ValueSpec`] entries (id, name, description,
//! optional group, tags, behavioural examples) plus provenance. The on-disk
//! form is a single canonical JSON document, shared by conceptualisation
//! output, detection prompts, the theory store and the HTTP API.

mod codec;
mod labels;
mod revision;
mod validate;

use serde::{Deserialize, Serialize};

pub use codec::{deserialize_theory, serialize_theory, to_canonical_json, CodecError};
pub(crate) use codec::parse_error as codec_parse_error;
pub use labels::{canonicalize_label, normalize_label, LabelIndex};
pub use revision::{apply_expert_revision, Edit, RevisionError};
pub use validate::{validate_theory, Issue, Severity, ValidationReport};

/// One value of a theory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueSpec {
    pub value_id: String,
    pub name: String,
    pub description: String,
    pub group: Option<String>,
    pub tags: Vec<String>,
    pub examples: Vec<String>,
}

/// A source document identifier paired with the digest of its content.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub document: String,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueTheory {
    pub theory_id: String,
    pub name: String,
    pub version: u64,
    pub source_manifest: Vec<ManifestEntry>,
    pub values: Vec<ValueSpec>,
    pub revised_by_expert: bool,
}

impl ValueTheory {
    pub fn value(&self, value_id: &str) -> Option<&ValueSpec> {
        self.values.iter().find(|v| v.value_id == value_id)
    }

    pub fn value_ids(&self) -> impl Iterator<Item = &str> {
        self.values.iter().map(|v| v.value_id.as_str())
    }

    /// Label used in human-readable output, e.g. `Achievement (ACH)`.
    pub fn display_label(&self, value_id: &str) -> String {
        match self.value(value_id) {
            Some(v) => format!("{} ({})", v.name, v.value_id),
            None => value_id.to_string(),
        }
    }
}
