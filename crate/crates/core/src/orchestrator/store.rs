use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value_spec::{deserialize_theory, serialize_theory, validate_theory, ValidationReport, ValueTheory};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("theory store I/O at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("theory id {0:?} cannot be used as a file name")]
    UnsafeId(String),
    #[error("refusing to store an invalid theory: {0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub theory_id: String,
    pub version: u64,
    pub revised_by_expert: bool,
}

/// Writes `bytes` to a temporary file beside `path`, syncs it and renames it
/// over `path`. Readers see either the old file or the new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn safe_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Current theory snapshots, backed by `<root>/<theory_id>.json` files.
///
/// Snapshots are immutable `Arc`s; replacing one never affects holders of
/// the previous `Arc`.
#[derive(Debug)]
pub struct TheoryStore {
    root: PathBuf,
    snapshots: RwLock<BTreeMap<String, Arc<ValueTheory>>>,
}

impl TheoryStore {
    /// Loads every valid `*.json` theory under `root`, creating the
    /// directory if needed. Unreadable, invalid or misnamed files are skipped
    /// with a warning; temporary files never match.
    pub fn open(root: &Path) -> Result<Self, StoreError> {
        let io = |source| StoreError::Io {
            path: root.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(root).map_err(io)?;
        let mut paths: Vec<PathBuf> = std::fs::read_dir(root)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();

        let mut snapshots = BTreeMap::new();
        for path in paths {
            match load_theory_file(&path) {
                Ok(theory) => {
                    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                    if stem != theory.theory_id {
                        tracing::warn!(path = %path.display(), theory_id = %theory.theory_id, "file name does not match theory id; skipped");
                        continue;
                    }
                    snapshots.insert(theory.theory_id.clone(), Arc::new(theory));
                }
                Err(message) => tracing::warn!(path = %path.display(), %message, "theory file skipped"),
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
            snapshots: RwLock::new(snapshots),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, theory_id: &str) -> PathBuf {
        self.root.join(format!("{theory_id}.json"))
    }

    pub fn get(&self, theory_id: &str) -> Option<Arc<ValueTheory>> {
        self.snapshots.read().expect("store lock").get(theory_id).cloned()
    }

    pub fn list(&self) -> Vec<TheorySummary> {
        self.snapshots
            .read()
            .expect("store lock")
            .values()
            .map(|t| TheorySummary {
                theory_id: t.theory_id.clone(),
                version: t.version,
                revised_by_expert: t.revised_by_expert,
            })
            .collect()
    }

    /// Validates, persists and then publishes `theory` as the current
    /// snapshot. On any error the previous snapshot stays installed.
    pub fn install(&self, theory: ValueTheory) -> Result<Arc<ValueTheory>, StoreError> {
        if !safe_id(&theory.theory_id) {
            return Err(StoreError::UnsafeId(theory.theory_id));
        }
        let report = validate_theory(&theory);
        if !report.ok {
            return Err(StoreError::Invalid(report));
        }
        let path = self.path_for(&theory.theory_id);
        write_atomic(&path, serialize_theory(&theory).as_bytes())
            .map_err(|source| StoreError::Io { path, source })?;
        let snapshot = Arc::new(theory);
        self.snapshots
            .write()
            .expect("store lock")
            .insert(snapshot.theory_id.clone(), Arc::clone(&snapshot));
        Ok(snapshot)
    }
}

/// Reads, decodes and validates one theory file.
pub fn load_theory_file(path: &Path) -> Result<ValueTheory, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let theory = deserialize_theory(&text).map_err(|e| e.to_string())?;
    let report = validate_theory(&theory);
    if !report.ok {
        return Err(report.to_string());
    }
    Ok(theory)
}
