//! Versioned prompt templates with `{{slot}}` placeholders.
//!
//! Templates are TOML data files (`conceptualise.toml`, `detect.toml`,
//! `rate.toml`) so they can be replaced without rebuilding. Built-in copies
//! ship with the crate.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::ChatMessage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Conceptualise,
    Detect,
    Rate,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 3] = [Self::Conceptualise, Self::Detect, Self::Rate];

    pub fn file_name(self) -> &'static str {
        match self {
            Self::Conceptualise => "conceptualise.toml",
            Self::Detect => "detect.toml",
            Self::Rate => "rate.toml",
        }
    }

    fn builtin_source(self) -> &'static str {
        match self {
            Self::Conceptualise => include_str!("../../templates/conceptualise.toml"),
            Self::Detect => include_str!("../../templates/detect.toml"),
            Self::Rate => include_str!("../../templates/rate.toml"),
        }
    }
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid template {origin}: {message}")]
    Invalid { origin: String, message: String },
    #[error("expected a {expected:?} template, got {actual:?}")]
    WrongKind {
        expected: TemplateKind,
        actual: TemplateKind,
    },
    #[error("template {template:?} slot {slot:?} is not bound")]
    Unbound {
        template: TemplateKind,
        slot: String,
    },
    #[error("template {template:?} has no slot {slot:?}")]
    UnknownSlot {
        template: TemplateKind,
        slot: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub template_id: TemplateKind,
    pub version: u32,
    pub slots: Vec<String>,
    #[serde(rename = "system")]
    pub system_text: String,
    #[serde(rename = "user")]
    pub user_text_with_slots: String,
}

/// Byte ranges of `{{name}}` markers in `text`, with the trimmed name.
fn markers(text: &str) -> Vec<(usize, usize, &str)> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(open) = text[from..].find("{{") {
        let open = from + open;
        let Some(close) = text[open + 2..].find("}}") else {
            break;
        };
        let close = open + 2 + close;
        out.push((open, close + 2, text[open + 2..close].trim()));
        from = close + 2;
    }
    out
}

impl PromptTemplate {
    pub fn parse(source: &str, origin: &str) -> Result<Self, TemplateError> {
        let template: Self = toml::from_str(source).map_err(|e| TemplateError::Invalid {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        template.check().map_err(|message| TemplateError::Invalid {
            origin: origin.to_string(),
            message,
        })?;
        Ok(template)
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let source = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&source, &path.display().to_string())
    }

    pub fn builtin(kind: TemplateKind) -> Self {
        Self::parse(kind.builtin_source(), kind.file_name()).expect("built-in templates are valid")
    }

    /// Every declared slot appears exactly once in the user text, no other
    /// markers appear there, and the system text has no markers at all.
    pub fn check(&self) -> Result<(), String> {
        if let Some((_, _, name)) = markers(&self.system_text).first() {
            return Err(format!("system text contains slot marker {name:?}"));
        }
        let found = markers(&self.user_text_with_slots);
        for slot in &self.slots {
            let n = found.iter().filter(|(_, _, name)| name == slot).count();
            if n != 1 {
                return Err(format!("slot {slot:?} appears {n} times in user text (expected 1)"));
            }
        }
        if let Some((_, _, name)) = found.iter().find(|(_, _, name)| !self.slots.iter().any(|s| s == name)) {
            return Err(format!("user text contains undeclared slot {name:?}"));
        }
        Ok(())
    }

    /// Substitutes every slot in a single pass; bound content is never
    /// re-scanned for markers.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<Vec<ChatMessage>, TemplateError> {
        if let Some((slot, _)) = bindings.iter().find(|(s, _)| !self.slots.iter().any(|d| d == s)) {
            return Err(TemplateError::UnknownSlot {
                template: self.template_id,
                slot: slot.to_string(),
            });
        }
        let text = &self.user_text_with_slots;
        let mut user = String::with_capacity(text.len() + bindings.iter().map(|(_, v)| v.len()).sum::<usize>());
        let mut last = 0;
        for (start, end, name) in markers(text) {
            let value = bindings
                .iter()
                .find(|(s, _)| *s == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| TemplateError::Unbound {
                    template: self.template_id,
                    slot: name.to_string(),
                })?;
            user.push_str(&text[last..start]);
            user.push_str(value);
            last = end;
        }
        user.push_str(&text[last..]);

        let mut messages = Vec::with_capacity(2);
        if !self.system_text.trim().is_empty() {
            messages.push(ChatMessage::system(self.system_text.clone()));
        }
        messages.push(ChatMessage::user(user));
        Ok(messages)
    }

    pub fn expect_kind(&self, expected: TemplateKind) -> Result<(), TemplateError> {
        if self.template_id == expected {
            Ok(())
        } else {
            Err(TemplateError::WrongKind {
                expected,
                actual: self.template_id,
            })
        }
    }
}

/// The three templates used by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub conceptualise: PromptTemplate,
    pub detect: PromptTemplate,
    pub rate: PromptTemplate,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self {
            conceptualise: PromptTemplate::builtin(TemplateKind::Conceptualise),
            detect: PromptTemplate::builtin(TemplateKind::Detect),
            rate: PromptTemplate::builtin(TemplateKind::Rate),
        }
    }

    /// Loads templates from `dir`; a missing file falls back to the
    /// built-in template of that kind.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let load = |kind: TemplateKind| -> Result<PromptTemplate, TemplateError> {
            let path = dir.join(kind.file_name());
            let template = if path.exists() {
                PromptTemplate::load(&path)?
            } else {
                PromptTemplate::builtin(kind)
            };
            template.expect_kind(kind)?;
            Ok(template)
        };
        Ok(Self {
            conceptualise: load(TemplateKind::Conceptualise)?,
            detect: load(TemplateKind::Detect)?,
            rate: load(TemplateKind::Rate)?,
        })
    }

    pub fn get(&self, kind: TemplateKind) -> &PromptTemplate {
        match kind {
            TemplateKind::Conceptualise => &self.conceptualise,
            TemplateKind::Detect => &self.detect,
            TemplateKind::Rate => &self.rate,
        }
    }
}
