use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ConceptualiseError;
use crate::digest::content_digest;
use crate::value_spec::ManifestEntry;

/// File extensions accepted as foundational documents.
pub const DOCUMENT_EXTENSIONS: &[&str] = &["txt", "md", "markdown"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub content: String,
}

/// Foundational documents of one theory plus their manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentSet {
    documents: Vec<Document>,
    manifest: Vec<ManifestEntry>,
}

impl DocumentSet {
    pub fn new(documents: Vec<Document>) -> Result<Self, ConceptualiseError> {
        let mut seen = HashSet::new();
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(ConceptualiseError::DuplicateDocument(d.id.clone()));
            }
        }
        let manifest = documents
            .iter()
            .map(|d| ManifestEntry {
                document: d.id.clone(),
                digest: content_digest(&d.content),
            })
            .collect();
        Ok(Self {
            documents,
            manifest,
        })
    }

    /// Reads every plain-text / markdown file directly under `dir`, ordered
    /// by file name. The file name is the document identifier.
    pub fn load_dir(dir: &Path) -> Result<Self, ConceptualiseError> {
        let io_err = |source| ConceptualiseError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(dir).map_err(io_err)? {
            let entry = entry.map_err(io_err)?;
            let path = entry.path();
            let accepted = path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| DOCUMENT_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
            if !accepted || !path.is_file() {
                continue;
            }
            let id = entry.file_name().to_string_lossy().into_owned();
            let content = std::fs::read_to_string(&path).map_err(|source| ConceptualiseError::Io {
                path: path.display().to_string(),
                source,
            })?;
            files.insert(id, content);
        }
        Self::new(
            files
                .into_iter()
                .map(|(id, content)| Document { id, content })
                .collect(),
        )
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn manifest(&self) -> &[ManifestEntry] {
        &self.manifest
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }
}

/// Identifiers that differ between a stored manifest and the current set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoChanges {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub modified: Vec<String>,
}

impl RepoChanges {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.modified.is_empty()
    }
}

/// Pure digest comparison; lists are sorted by identifier.
pub fn detect_repo_changes(stored: &[ManifestEntry], current: &DocumentSet) -> RepoChanges {
    let old: BTreeMap<&str, &str> = stored
        .iter()
        .map(|e| (e.document.as_str(), e.digest.as_str()))
        .collect();
    let new: BTreeMap<&str, &str> = current
        .manifest
        .iter()
        .map(|e| (e.document.as_str(), e.digest.as_str()))
        .collect();

    let mut changes = RepoChanges::default();
    for (id, digest) in &new {
        match old.get(id) {
            None => changes.added.push(id.to_string()),
            Some(d) if d != digest => changes.modified.push(id.to_string()),
            Some(_) => {}
        }
    }
    changes.removed = old
        .keys()
        .filter(|id| !new.contains_key(*id))
        .map(|id| id.to_string())
        .collect();
    changes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, content: &str) -> Document {
        Document {
            id: id.into(),
            content: content.into(),
        }
    }

    fn set(docs: &[(&str, &str)]) -> DocumentSet {
        DocumentSet::new(docs.iter().map(|(i, c)| doc(i, c)).collect()).unwrap()
    }

    #[test]
    fn identical_manifests_no_changes() {
        let a = set(&[("a.md", "alpha"), ("b.md", "beta")]);
        assert!(detect_repo_changes(a.manifest(), &a).is_empty());
    }

    #[test]
    fn one_character_edit_is_modified() {
        let a = set(&[("a.md", "alpha"), ("b.md", "beta")]);
        let b = set(&[("a.md", "alphA"), ("b.md", "beta")]);
        let changes = detect_repo_changes(a.manifest(), &b);
        assert_eq!(changes.modified, vec!["a.md".to_string()]);
        assert!(changes.added.is_empty() && changes.removed.is_empty());
    }

    #[test]
    fn additions_and_removals() {
        let a = set(&[("a.md", "alpha"), ("b.md", "beta")]);
        let b = set(&[("b.md", "beta"), ("c.md", "gamma")]);
        let changes = detect_repo_changes(a.manifest(), &b);
        assert_eq!(changes.added, vec!["c.md".to_string()]);
        assert_eq!(changes.removed, vec!["a.md".to_string()]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(matches!(
            DocumentSet::new(vec![doc("a", "1"), doc("a", "2")]),
            Err(ConceptualiseError::DuplicateDocument(_))
        ));
    }

    #[test]
    fn load_dir_is_sorted_and_filtered() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.md"), "beta").unwrap();
        std::fs::write(dir.path().join("a.txt"), "alpha").unwrap();
        std::fs::write(dir.path().join("c.pdf"), "ignored").unwrap();
        let docs = DocumentSet::load_dir(dir.path()).unwrap();
        let ids: Vec<_> = docs.documents().iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["a.txt", "b.md"]);
        assert_eq!(docs.manifest()[0].digest, content_digest("alpha"));
    }

    #[test]
    fn fixture_docs_match_fixture_manifest() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/docs/schwartz");
        let docs = DocumentSet::load_dir(&dir).unwrap();
        let theory = crate::fixtures::schwartz_theory();
        assert!(detect_repo_changes(&theory.source_manifest, &docs).is_empty());
    }
}
