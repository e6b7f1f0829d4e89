//! Generation of a [`ValueTheory`] from foundational documents.
//!
//! All documents are concatenated into one prompt (bounded by
//! [`ConceptualiseOptions::max_prompt_chars`]), the gateway is called once,
//! and the structured reply is mapped into a theory with version 1. A reply
//! without an extractable document is re-asked exactly once with a format
//! reminder appended. The result must pass [`validate_theory`].

mod documents;
mod template;

use serde_json::Value;
use thiserror::Error;

pub use documents::{detect_repo_changes, Document, DocumentSet, RepoChanges, DOCUMENT_EXTENSIONS};
pub use template::{PromptTemplate, TemplateError, TemplateKind, TemplateSet};

use crate::llm::{extract_structured, ChatExchange, ExtractError, GatewayError, LlmGateway};
use crate::value_spec::{validate_theory, Issue, Severity, ValidationReport, ValueSpec, ValueTheory};

/// Appended to the user prompt when the first reply held no usable JSON.
pub const FORMAT_REMINDER: &str = "FORMAT REMINDER: your previous answer could not be parsed. \
Reply with exactly one JSON object of the form {\"name\": \"...\", \"values\": [...]} and no other text.";

pub const DEFAULT_MAX_PROMPT_CHARS: usize = 400_000;

#[derive(Debug, Error)]
pub enum ConceptualiseError {
    #[error("document set is empty")]
    EmptyDocumentSet,
    #[error("duplicate document identifier {0:?}")]
    DuplicateDocument(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("prompt of {chars} characters exceeds the limit of {limit}")]
    Oversize { chars: usize, limit: usize },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("gateway: {0}")]
    Gateway(#[from] GatewayError),
    #[error("reply extraction failed after one re-ask: {0}")]
    Extraction(ExtractError),
    #[error("reply did not yield a valid specification: {0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone)]
pub struct ConceptualiseOptions {
    pub theory_id: String,
    /// Used when the reply carries no theory name.
    pub fallback_name: Option<String>,
    pub max_prompt_chars: usize,
}

impl ConceptualiseOptions {
    pub fn new(theory_id: impl Into<String>) -> Self {
        Self {
            theory_id: theory_id.into(),
            fallback_name: None,
            max_prompt_chars: DEFAULT_MAX_PROMPT_CHARS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Conceptualisation {
    pub theory: ValueTheory,
    pub exchanges: Vec<ChatExchange>,
}

fn render_documents(docs: &DocumentSet) -> String {
    let mut out = String::new();
    for d in docs.documents() {
        out.push_str("=== Document: ");
        out.push_str(&d.id);
        out.push_str(" ===\n");
        out.push_str(d.content.trim_end());
        out.push_str("\n\n");
    }
    out
}

pub async fn conceptualise(
    docs: &DocumentSet,
    template: &PromptTemplate,
    gateway: &LlmGateway,
    options: &ConceptualiseOptions,
) -> Result<Conceptualisation, ConceptualiseError> {
    if docs.is_empty() {
        return Err(ConceptualiseError::EmptyDocumentSet);
    }
    template.expect_kind(TemplateKind::Conceptualise)?;
    let rendered = render_documents(docs);
    let mut messages = template.render(&[("documents", &rendered)])?;
    let chars: usize = messages.iter().map(|m| m.content.chars().count()).sum();
    if chars > options.max_prompt_chars {
        return Err(ConceptualiseError::Oversize {
            chars,
            limit: options.max_prompt_chars,
        });
    }

    let mut exchanges = Vec::with_capacity(2);
    let first = gateway.complete(&messages).await?;
    let extracted = extract_structured(&first.response_content);
    exchanges.push(first);
    let document = match extracted {
        Ok(doc) => doc,
        Err(first_err) => {
            tracing::warn!(error = %first_err, "conceptualisation reply unparseable, re-asking once");
            let last = messages.last_mut().expect("render yields a user message");
            last.content.push_str("\n\n");
            last.content.push_str(FORMAT_REMINDER);
            let second = gateway.complete(&messages).await?;
            let extracted = extract_structured(&second.response_content);
            exchanges.push(second);
            extracted.map_err(ConceptualiseError::Extraction)?
        }
    };

    let theory = theory_from_reply(&document, docs, options)?;
    let report = validate_theory(&theory);
    if !report.ok {
        return Err(ConceptualiseError::Invalid(report));
    }
    Ok(Conceptualisation { theory, exchanges })
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ConceptualiseError {
    ConceptualiseError::Invalid(ValidationReport::single_error(path, message))
}

/// Lenient mapping: missing optional fields become empty and are then
/// caught by validation with a precise path.
fn theory_from_reply(
    reply: &Value,
    docs: &DocumentSet,
    options: &ConceptualiseOptions,
) -> Result<ValueTheory, ConceptualiseError> {
    let (name, items) = match reply {
        Value::Array(items) => (None, items),
        Value::Object(map) => {
            let items = map
                .get("values")
                .and_then(Value::as_array)
                .ok_or_else(|| invalid("values", "reply has no \"values\" array"))?;
            (map.get("name").and_then(Value::as_str), items)
        }
        _ => return Err(invalid("values", "reply is neither an object nor an array")),
    };

    let mut values = Vec::with_capacity(items.len());
    let mut issues = Vec::new();
    for (i, item) in items.iter().enumerate() {
        match value_from_reply(item) {
            Ok(v) => values.push(v),
            Err(message) => issues.push(Issue {
                severity: Severity::Error,
                path: format!("values[{i}]"),
                message,
            }),
        }
    }
    if !issues.is_empty() {
        return Err(ConceptualiseError::Invalid(ValidationReport::from_issues(issues)));
    }

    Ok(ValueTheory {
        theory_id: options.theory_id.clone(),
        name: name
            .map(str::to_string)
            .or_else(|| options.fallback_name.clone())
            .unwrap_or_else(|| options.theory_id.clone()),
        version: 1,
        source_manifest: docs.manifest().to_vec(),
        values,
        revised_by_expert: false,
    })
}

fn string_field(obj: &serde_json::Map<String, Value>, keys: &[&str]) -> Option<String> {
    keys.iter()
        .find_map(|k| obj.get(*k).and_then(Value::as_str))
        .map(|s| s.trim().to_string())
}

fn list_field(obj: &serde_json::Map<String, Value>, key: &str) -> Result<Vec<String>, String> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(|s| s.trim().to_string())
                    .ok_or_else(|| format!("{key} must contain strings"))
            })
            .collect(),
        Some(Value::String(s)) => Ok(s
            .split([',', ';'])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()),
        Some(_) => Err(format!("{key} must be a list of strings")),
    }
}

fn value_from_reply(item: &Value) -> Result<ValueSpec, String> {
    let obj = item.as_object().ok_or("value entry is not an object")?;
    Ok(ValueSpec {
        value_id: string_field(obj, &["value_id", "id"]).unwrap_or_default(),
        name: string_field(obj, &["name"]).unwrap_or_default(),
        description: string_field(obj, &["description"]).unwrap_or_default(),
        group: string_field(obj, &["group"]).filter(|g| !g.is_empty()),
        tags: list_field(obj, "tags")?,
        examples: list_field(obj, "examples")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::llm::{BackendConfig, ScriptEntry, ScriptedBackend};
    use std::sync::Arc;

    fn docs() -> DocumentSet {
        DocumentSet::new(vec![
            Document {
                id: "a.md".into(),
                content: "Foundational text about values.".into(),
            },
            Document {
                id: "b.md".into(),
                content: "More detail.".into(),
            },
        ])
        .unwrap()
    }

    fn gateway(entries: Vec<ScriptEntry>) -> LlmGateway {
        LlmGateway::with_backend(
            BackendConfig::scripted("unused"),
            Arc::new(ScriptedBackend::new(entries, None)),
        )
    }

    fn fixture_reply() -> Value {
        let theory = fixtures::schwartz_theory();
        serde_json::json!({ "name": theory.name, "values": theory.values })
    }

    async fn run(entries: Vec<ScriptEntry>) -> Result<Conceptualisation, ConceptualiseError> {
        conceptualise(
            &docs(),
            &PromptTemplate::builtin(TemplateKind::Conceptualise),
            &gateway(entries),
            &ConceptualiseOptions::new("schwartz-refined"),
        )
        .await
    }

    #[tokio::test]
    async fn fixture_reply_yields_nineteen_values() {
        let out = run(vec![ScriptEntry::reply("Foundational", fixture_reply().to_string())])
            .await
            .unwrap();
        assert_eq!(out.theory.values.len(), 19);
        assert_eq!(out.theory.version, 1);
        assert!(!out.theory.revised_by_expert);
        assert_eq!(out.theory.source_manifest, docs().manifest());
        assert_eq!(out.theory.values, fixtures::schwartz_theory().values);
        assert!(validate_theory(&out.theory).ok);
        assert_eq!(out.exchanges.len(), 1);
    }

    #[tokio::test]
    async fn prompt_contains_every_document() {
        let out = run(vec![ScriptEntry::reply("a.md", fixture_reply().to_string())])
            .await
            .unwrap();
        let prompt = &out.exchanges[0].request.last().unwrap().content;
        assert!(prompt.contains("=== Document: a.md ===\nFoundational text about values."));
        assert!(prompt.contains("=== Document: b.md ===\nMore detail."));
    }

    #[tokio::test]
    async fn empty_document_set() {
        let err = conceptualise(
            &DocumentSet::new(vec![]).unwrap(),
            &PromptTemplate::builtin(TemplateKind::Conceptualise),
            &gateway(vec![]),
            &ConceptualiseOptions::new("t"),
        )
        .await
        .unwrap_err();
        assert!(matches!(err, ConceptualiseError::EmptyDocumentSet));
    }

    #[tokio::test]
    async fn missing_tags_names_the_path() {
        let mut reply = fixture_reply();
        reply["values"][4].as_object_mut().unwrap().remove("tags");
        let err = run(vec![ScriptEntry::reply("Foundational", reply.to_string())])
            .await
            .unwrap_err();
        match err {
            ConceptualiseError::Invalid(report) => {
                assert!(report.errors().any(|i| i.path == "values[4].tags"), "{report}");
            }
            other => panic!("{other}"),
        }
    }

    #[tokio::test]
    async fn one_reask_then_success() {
        let out = run(vec![
            ScriptEntry::reply("FORMAT REMINDER", format!("```json\n{}\n```", fixture_reply())),
            ScriptEntry::reply("Foundational", "Sorry, I cannot produce JSON today."),
        ])
        .await
        .unwrap();
        assert_eq!(out.exchanges.len(), 2);
        assert_eq!(out.theory.values.len(), 19);
    }

    #[tokio::test]
    async fn second_failure_aborts() {
        let err = run(vec![ScriptEntry::reply("Foundational", "still prose")])
            .await
            .unwrap_err();
        assert!(matches!(err, ConceptualiseError::Extraction(ExtractError::NoCandidate)));
    }

    #[tokio::test]
    async fn oversize_is_rejected() {
        let err = conceptualise(
            &docs(),
            &PromptTemplate::builtin(TemplateKind::Conceptualise),
            &gateway(vec![]),
            &ConceptualiseOptions {
                max_prompt_chars: 100,
                ..ConceptualiseOptions::new("t")
            },
        )
        .await
        .unwrap_err();
        assert!(matches!(err, ConceptualiseError::Oversize { limit: 100, .. }));
    }

    #[tokio::test]
    async fn wrong_template_kind() {
        let err = conceptualise(
            &docs(),
            &PromptTemplate::builtin(TemplateKind::Detect),
            &gateway(vec![]),
            &ConceptualiseOptions::new("t"),
        )
        .await
        .unwrap_err();
        assert!(matches!(err, ConceptualiseError::Template(TemplateError::WrongKind { .. })));
    }

    #[tokio::test]
    async fn deterministic_under_script() {
        let entries = vec![ScriptEntry::reply("Foundational", fixture_reply().to_string())];
        let a = run(entries.clone()).await.unwrap();
        let b = run(entries).await.unwrap();
        assert_eq!(a.theory, b.theory);
        assert!(detect_repo_changes(&a.theory.source_manifest, &docs()).is_empty());
    }
}
