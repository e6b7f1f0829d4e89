use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ValueTheory;
use crate::digest::is_digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    /// Locator such as `values[3].tags`.
    pub path: String,
    pub message: String,
}

/// Outcome of [`validate_theory`]. `ok` is true iff no issue is an error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn from_issues(issues: Vec<Issue>) -> Self {
        let ok = !issues.iter().any(|i| i.severity == Severity::Error);
        Self { ok, issues }
    }

    pub fn single_error(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::from_issues(vec![Issue {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        }])
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "ok");
        }
        let rendered: Vec<String> = self
            .issues
            .iter()
            .map(|i| {
                let sev = match i.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                };
                format!("{sev} at {}: {}", i.path, i.message)
            })
            .collect();
        write!(f, "{}", rendered.join("; "))
    }
}

struct Collector(Vec<Issue>);

impl Collector {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Issue {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Issue {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }
}

/// Checks every theory invariant and reports each violation. Never fails.
pub fn validate_theory(theory: &ValueTheory) -> ValidationReport {
    let mut c = Collector(Vec::new());

    if theory.theory_id.trim().is_empty() {
        c.error("theory_id", "theory_id must not be empty");
    } else if theory.theory_id.chars().any(char::is_whitespace) {
        c.error("theory_id", format!("theory_id {:?} contains whitespace", theory.theory_id));
    }
    if theory.name.trim().is_empty() {
        c.warning("name", "theory name is empty");
    }
    if theory.version == 0 {
        c.error("version", "version must be at least 1");
    }

    let mut documents = HashSet::new();
    for (i, entry) in theory.source_manifest.iter().enumerate() {
        let path = format!("source_manifest[{i}]");
        if entry.document.is_empty() {
            c.error(format!("{path}.document"), "document identifier is empty");
        } else if !documents.insert(entry.document.as_str()) {
            c.error(
                format!("{path}.document"),
                format!("duplicate document {:?}", entry.document),
            );
        }
        if !is_digest(&entry.digest) {
            c.error(
                format!("{path}.digest"),
                "digest must be 64 lowercase hex characters",
            );
        }
    }

    if theory.values.is_empty() {
        c.error("values", "theory defines no values");
    }

    let mut ids = HashSet::new();
    for (i, value) in theory.values.iter().enumerate() {
        let path = format!("values[{i}]");
        let id = value.value_id.as_str();
        if id.is_empty() {
            c.error(format!("{path}.value_id"), "value_id must not be empty");
        } else if id.chars().any(char::is_whitespace) {
            c.error(format!("{path}.value_id"), format!("value_id {id:?} contains whitespace"));
        } else if !ids.insert(id) {
            c.error(format!("{path}.value_id"), format!("duplicate value_id {id:?}"));
        }
        if value.name.trim().is_empty() {
            c.error(format!("{path}.name"), format!("value {id:?} has an empty name"));
        }
        if value.description.trim().is_empty() {
            c.warning(format!("{path}.description"), format!("value {id:?} has no description"));
        }
        if matches!(&value.group, Some(g) if g.trim().is_empty()) {
            c.warning(format!("{path}.group"), "group is present but blank");
        }
        check_list(&mut c, &path, "tags", "tag", id, &value.tags);
        check_list(&mut c, &path, "examples", "example", id, &value.examples);
    }

    ValidationReport::from_issues(c.0)
}

fn check_list(c: &mut Collector, base: &str, field: &str, noun: &str, id: &str, items: &[String]) {
    if items.is_empty() {
        c.error(format!("{base}.{field}"), format!("value {id:?} has no {field}"));
        return;
    }
    let mut seen = HashSet::new();
    for (k, item) in items.iter().enumerate() {
        if item.trim().is_empty() {
            c.error(format!("{base}.{field}[{k}]"), format!("blank {noun}"));
        } else if !seen.insert(item.as_str()) {
            c.error(format!("{base}.{field}[{k}]"), format!("duplicate {noun} {item:?}"));
        }
    }
}
