use serde_json::{Map, Value};

use super::{DetectionError, DetectionItem};
use crate::conceptualise::{PromptTemplate, TemplateKind};
use crate::llm::{extract_structured, ChatExchange, LlmGateway};
use crate::value_spec::{serialize_theory, LabelIndex, ValueTheory};

#[derive(Debug, Clone)]
pub struct DetectOutcome {
    pub items: Vec<DetectionItem>,
    pub warnings: Vec<String>,
    pub exchange: ChatExchange,
}

/// Lowercased with whitespace runs collapsed; used for evidence matching.
pub fn normalize_for_match(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

const QUOTE_CHARS: &[char] = &['"', '\'', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}', '`'];

/// Keys under which replies commonly carry a value label.
pub(crate) const LABEL_KEYS: &[&str] = &["value", "value_id", "label", "id", "name"];

pub(crate) fn label_of(obj: &Map<String, Value>) -> Option<&str> {
    LABEL_KEYS
        .iter()
        .find_map(|k| obj.get(*k).and_then(Value::as_str))
}

/// The list of entries in a reply: either a bare array or the first array
/// found under one of `keys`.
pub(crate) fn reply_entries<'a>(reply: &'a Value, keys: &[&str]) -> Result<&'a [Value], DetectionError> {
    match reply {
        Value::Array(items) => Ok(items),
        Value::Object(map) => keys
            .iter()
            .find_map(|k| map.get(*k).and_then(Value::as_array))
            .map(Vec::as_slice)
            .ok_or_else(|| {
                DetectionError::MalformedReply(format!("expected an array under one of {keys:?}"))
            }),
        _ => Err(DetectionError::MalformedReply(
            "reply is neither an object nor an array".into(),
        )),
    }
}

fn evidence_of(obj: &Map<String, Value>) -> Vec<String> {
    match obj.get("evidence").or_else(|| obj.get("quotes")) {
        Some(Value::String(s)) => vec![s.clone()],
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(Value::as_str)
            .map(str::to_string)
            .collect(),
        _ => Vec::new(),
    }
}

pub async fn detect_values(
    text: &str,
    theory: &ValueTheory,
    template: &PromptTemplate,
    gateway: &LlmGateway,
) -> Result<DetectOutcome, DetectionError> {
    if text.trim().is_empty() {
        return Err(DetectionError::EmptyText);
    }
    template.expect_kind(TemplateKind::Detect)?;
    let theory_json = serialize_theory(theory);
    let messages = template.render(&[("theory", &theory_json), ("text", text)])?;
    let exchange = gateway.complete(&messages).await?;
    let reply = extract_structured(&exchange.response_content)?;
    let (items, warnings) = interpret_detection_reply(&reply, text, theory)?;
    Ok(DetectOutcome {
        items,
        warnings,
        exchange,
    })
}

/// Canonicalises labels, drops unknown ones and unsupported evidence, and
/// merges duplicate values. Order follows first appearance in the reply.
pub fn interpret_detection_reply(
    reply: &Value,
    text: &str,
    theory: &ValueTheory,
) -> Result<(Vec<DetectionItem>, Vec<String>), DetectionError> {
    let entries = reply_entries(reply, &["values", "detected", "detections"])?;
    let index = LabelIndex::new(theory);
    let haystack = normalize_for_match(text);
    let mut items: Vec<DetectionItem> = Vec::new();
    let mut warnings = Vec::new();

    for (i, entry) in entries.iter().enumerate() {
        let (label, evidence) = match entry {
            Value::String(s) => (s.as_str(), Vec::new()),
            Value::Object(obj) => match label_of(obj) {
                Some(label) => (label, evidence_of(obj)),
                None => {
                    warnings.push(format!("detection entry {i} has no value label; skipped"));
                    continue;
                }
            },
            _ => {
                warnings.push(format!("detection entry {i} is not an object or string; skipped"));
                continue;
            }
        };
        let Some(value_id) = index.resolve(label) else {
            warnings.push(format!("unmatched label {label:?} dropped"));
            continue;
        };

        let position = match items.iter().position(|d| d.value_id == value_id) {
            Some(p) => p,
            None => {
                items.push(DetectionItem {
                    value_id: value_id.to_string(),
                    evidence: Vec::new(),
                });
                items.len() - 1
            }
        };
        for quote in evidence {
            let quote = quote.trim().trim_matches(QUOTE_CHARS).trim().to_string();
            if quote.is_empty() {
                continue;
            }
            if !haystack.contains(&normalize_for_match(&quote)) {
                warnings.push(format!(
                    "evidence {quote:?} for {value_id} does not occur in the text; dropped"
                ));
                continue;
            }
            let existing = &mut items[position].evidence;
            if !existing.contains(&quote) {
                existing.push(quote);
            }
        }
    }
    Ok((items, warnings))
}
