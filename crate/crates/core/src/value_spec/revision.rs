//! Expert revisions of a theory.
//!
//! Edits address the theory with path locators:
//!
//! | path                        | content                              |
//! |-----------------------------|--------------------------------------|
//! | `name`                      | string                               |
//! | `values[+]`                 | value object, appended               |
//! | `values[SEL]`               | value object (replace) or `null` (delete) |
//! | `values[SEL].FIELD`         | new field content                    |
//! | `values[SEL].tags[+]`       | string appended to tags              |
//! | `values[SEL].examples[+]`   | string appended to examples          |
//!
//! `SEL` is either a zero-based index or a value id. `FIELD` is one of
//! `value_id`, `name`, `description`, `group`, `tags`, `examples`. Edits are
//! applied in order, so a selector sees the effect of earlier edits.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::codec::decode_value_spec;
use super::{validate_theory, ValidationReport, ValueSpec, ValueTheory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edit {
    pub path: String,
    pub value: Value,
}

impl Edit {
    pub fn new(path: impl Into<String>, value: impl Into<Value>) -> Self {
        Self {
            path: path.into(),
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RevisionError {
    #[error("revision rejected: {0}")]
    Invalid(ValidationReport),
}

impl RevisionError {
    pub fn report(&self) -> &ValidationReport {
        match self {
            RevisionError::Invalid(r) => r,
        }
    }
}

/// Applies `edits` to a copy of `theory`. The result has its version bumped
/// and is marked as expert-revised. The input is never modified; a rejected
/// edit set returns the validation report of the would-be result.
pub fn apply_expert_revision(
    theory: &ValueTheory,
    edits: &[Edit],
) -> Result<ValueTheory, RevisionError> {
    let mut next = theory.clone();
    for edit in edits {
        apply_edit(&mut next, edit)
            .map_err(|message| RevisionError::Invalid(ValidationReport::single_error(&edit.path, message)))?;
    }
    next.version = theory.version + 1;
    next.revised_by_expert = true;

    let report = validate_theory(&next);
    if report.ok {
        Ok(next)
    } else {
        Err(RevisionError::Invalid(report))
    }
}

enum Selector<'a> {
    Append,
    Index(usize),
    Id(&'a str),
}

fn parse_values_path(path: &str) -> Result<(Selector<'_>, Option<&str>), String> {
    let rest = path
        .strip_prefix("values[")
        .ok_or_else(|| format!("unsupported path {path:?}"))?;
    let close = rest.find(']').ok_or("unterminated selector")?;
    let sel = &rest[..close];
    let tail = &rest[close + 1..];
    let selector = if sel == "+" {
        Selector::Append
    } else if let Ok(i) = sel.parse::<usize>() {
        Selector::Index(i)
    } else if sel.is_empty() {
        return Err("empty selector".into());
    } else {
        Selector::Id(sel)
    };
    let field = match tail {
        "" => None,
        t => Some(t.strip_prefix('.').ok_or_else(|| format!("unexpected {t:?} after selector"))?),
    };
    Ok((selector, field))
}

fn resolve(theory: &ValueTheory, selector: &Selector<'_>) -> Result<usize, String> {
    match selector {
        Selector::Index(i) if *i < theory.values.len() => Ok(*i),
        Selector::Index(i) => Err(format!("no value at index {i}")),
        Selector::Id(id) => theory
            .values
            .iter()
            .position(|v| v.value_id == *id)
            .or_else(|| {
                theory
                    .values
                    .iter()
                    .position(|v| v.value_id.eq_ignore_ascii_case(id))
            })
            .ok_or_else(|| format!("no value with id {id:?}")),
        Selector::Append => Err("append selector cannot be combined with a field".into()),
    }
}

fn as_string(value: &Value) -> Result<String, String> {
    value
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| "expected a string".to_string())
}

fn as_strings(value: &Value) -> Result<Vec<String>, String> {
    value
        .as_array()
        .ok_or("expected an array of strings")?
        .iter()
        .map(as_string)
        .collect()
}

fn as_value_spec(value: &Value, path: &str) -> Result<ValueSpec, String> {
    decode_value_spec(value, path).map_err(|e| e.to_string())
}

fn apply_edit(theory: &mut ValueTheory, edit: &Edit) -> Result<(), String> {
    let path = edit.path.trim();
    match path {
        "name" => {
            theory.name = as_string(&edit.value)?;
            return Ok(());
        }
        "theory_id" | "version" | "source_manifest" | "revised_by_expert" => {
            return Err(format!("{path} is not editable"));
        }
        _ => {}
    }

    let (selector, field) = parse_values_path(path)?;
    match (selector, field) {
        (Selector::Append, None) => {
            theory.values.push(as_value_spec(&edit.value, path)?);
        }
        (selector, None) => {
            let idx = resolve(theory, &selector)?;
            if edit.value.is_null() {
                theory.values.remove(idx);
            } else {
                theory.values[idx] = as_value_spec(&edit.value, path)?;
            }
        }
        (selector, Some(field)) => {
            let idx = resolve(theory, &selector)?;
            let v = &mut theory.values[idx];
            match field {
                "value_id" => v.value_id = as_string(&edit.value)?,
                "name" => v.name = as_string(&edit.value)?,
                "description" => v.description = as_string(&edit.value)?,
                "group" => {
                    v.group = match &edit.value {
                        Value::Null => None,
                        other => Some(as_string(other)?),
                    }
                }
                "tags" => v.tags = as_strings(&edit.value)?,
                "examples" => v.examples = as_strings(&edit.value)?,
                "tags[+]" => v.tags.push(as_string(&edit.value)?),
                "examples[+]" => v.examples.push(as_string(&edit.value)?),
                other => return Err(format!("unknown value field {other:?}")),
            }
        }
    }
    Ok(())
}
