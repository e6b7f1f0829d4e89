//! Canonical JSON codec for theory specification files.
//!
//! Canonical form: UTF-8, object keys sorted lexicographically at every
//! level, list order preserved, two-space indentation, trailing newline.
//! `group` is always written (as `null` when absent).

use serde_json::{Map, Value};
use thiserror::Error;

use super::{ManifestEntry, ValueSpec, ValueTheory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    /// Malformed JSON. `offset` counts characters from the start of input.
    #[error("parse error at character {offset} (line {line}, column {column}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

impl CodecError {
    pub fn path(&self) -> Option<&str> {
        match self {
            CodecError::Schema { path, .. } => Some(path),
            CodecError::Parse { .. } => None,
        }
    }
}

/// Serialises a theory in canonical form. Equal theories give identical bytes.
pub fn serialize_theory(theory: &ValueTheory) -> String {
    to_canonical_json(theory)
}

/// Any serialisable value in the same canonical layout as theory files.
pub fn to_canonical_json<T: serde::Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("value serialises to JSON");
    let mut out = serde_json::to_string_pretty(&sort_keys(value)).expect("JSON value prints");
    out.push('\n');
    out
}

/// Recursively rebuilds objects with sorted keys, independent of the
/// `serde_json` map implementation in use.
pub(crate) fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut sorted = Map::new();
            for (k, v) in entries {
                sorted.insert(k, sort_keys(v));
            }
            Value::Object(sorted)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Parses a theory file strictly: every field must be present with the right
/// type and unknown fields are rejected.
pub fn deserialize_theory(text: &str) -> Result<ValueTheory, CodecError> {
    let value: Value = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
    decode_theory(&value)
}

pub(crate) fn parse_error(text: &str, err: &serde_json::Error) -> CodecError {
    let offset = if err.is_eof() {
        text.chars().count()
    } else {
        char_offset(text, err.line(), err.column())
    };
    CodecError::Parse {
        offset,
        line: err.line(),
        column: err.column(),
        message: err.to_string(),
    }
}

/// Converts serde_json's 1-based line / byte column into the 0-based
/// character index of the offending character.
pub(crate) fn char_offset(text: &str, line: usize, column: usize) -> usize {
    let mut byte = 0usize;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            byte += column.saturating_sub(1).min(l.len());
            break;
        }
        byte += l.len();
    }
    let mut byte = byte.min(text.len());
    while !text.is_char_boundary(byte) {
        byte -= 1;
    }
    text[..byte].chars().count()
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> CodecError {
    CodecError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn join(base: &str, key: &str) -> String {
    if base.is_empty() {
        key.to_string()
    } else {
        format!("{base}.{key}")
    }
}

struct Obj<'a> {
    path: &'a str,
    map: &'a Map<String, Value>,
}

impl<'a> Obj<'a> {
    fn new(value: &'a Value, path: &'a str, allowed: &[&str]) -> Result<Self, CodecError> {
        let map = value.as_object().ok_or_else(|| {
            let at = if path.is_empty() { "$" } else { path };
            schema(at, "expected an object")
        })?;
        if let Some(unknown) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(schema(join(path, unknown), "unknown field"));
        }
        Ok(Self { path, map })
    }

    fn field(&self, key: &str) -> Result<&'a Value, CodecError> {
        self.map
            .get(key)
            .ok_or_else(|| schema(join(self.path, key), "missing required field"))
    }

    fn string(&self, key: &str) -> Result<String, CodecError> {
        self.field(key)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| schema(join(self.path, key), "expected a string"))
    }

    fn opt_string(&self, key: &str) -> Result<Option<String>, CodecError> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(schema(join(self.path, key), "expected a string or null")),
        }
    }

    fn array(&self, key: &str) -> Result<&'a Vec<Value>, CodecError> {
        self.field(key)?
            .as_array()
            .ok_or_else(|| schema(join(self.path, key), "expected an array"))
    }

    fn strings(&self, key: &str) -> Result<Vec<String>, CodecError> {
        let path = join(self.path, key);
        self.array(key)?
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| schema(format!("{path}[{i}]"), "expected a string"))
            })
            .collect()
    }
}

fn decode_theory(value: &Value) -> Result<ValueTheory, CodecError> {
    let obj = Obj::new(
        value,
        "",
        &[
            "theory_id",
            "name",
            "version",
            "source_manifest",
            "values",
            "revised_by_expert",
        ],
    )?;
    let version = obj
        .field("version")?
        .as_u64()
        .ok_or_else(|| schema("version", "expected a non-negative integer"))?;
    let revised_by_expert = obj
        .field("revised_by_expert")?
        .as_bool()
        .ok_or_else(|| schema("revised_by_expert", "expected a boolean"))?;

    let mut source_manifest = Vec::new();
    for (i, entry) in obj.array("source_manifest")?.iter().enumerate() {
        let path = format!("source_manifest[{i}]");
        let e = Obj::new(entry, &path, &["document", "digest"])?;
        source_manifest.push(ManifestEntry {
            document: e.string("document")?,
            digest: e.string("digest")?,
        });
    }

    let mut values = Vec::new();
    for (i, v) in obj.array("values")?.iter().enumerate() {
        let path = format!("values[{i}]");
        values.push(decode_value_spec(v, &path)?);
    }

    Ok(ValueTheory {
        theory_id: obj.string("theory_id")?,
        name: obj.string("name")?,
        version,
        source_manifest,
        values,
        revised_by_expert,
    })
}

pub(crate) fn decode_value_spec(value: &Value, path: &str) -> Result<ValueSpec, CodecError> {
    let v = Obj::new(
        value,
        path,
        &["value_id", "name", "description", "group", "tags", "examples"],
    )?;
    Ok(ValueSpec {
        value_id: v.string("value_id")?,
        name: v.string("name")?,
        description: v.string("description")?,
        group: v.opt_string("group")?,
        tags: v.strings("tags")?,
        examples: v.strings("examples")?,
    })
}
