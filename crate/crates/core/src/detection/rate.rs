use serde::Serialize;
use serde_json::Value;

use super::detect::{label_of, reply_entries};
use super::{DetectionError, DetectionItem, IntensityLevel, RatedValue};
use crate::conceptualise::{PromptTemplate, TemplateKind};
use crate::llm::{extract_structured, ChatExchange, LlmGateway};
use crate::value_spec::{serialize_theory, LabelIndex, ValueTheory};

pub const MISSING_RATING_JUSTIFICATION: &str = "rating missing from model reply";
pub const MISSING_JUSTIFICATION: &str = "justification missing from model reply";

#[derive(Debug, Clone)]
pub struct RateOutcome {
    pub ratings: Vec<RatedValue>,
    pub warnings: Vec<String>,
    pub exchange: ChatExchange,
}

#[derive(Serialize)]
struct DetectedForPrompt<'a> {
    value: String,
    evidence: &'a [String],
}

pub async fn rate_intensity(
    text: &str,
    detected: &[DetectionItem],
    theory: &ValueTheory,
    template: &PromptTemplate,
    gateway: &LlmGateway,
) -> Result<RateOutcome, DetectionError> {
    template.expect_kind(TemplateKind::Rate)?;
    let theory_json = serialize_theory(theory);
    let listed: Vec<DetectedForPrompt<'_>> = detected
        .iter()
        .map(|d| DetectedForPrompt {
            value: theory.display_label(&d.value_id),
            evidence: &d.evidence,
        })
        .collect();
    let detected_json = serde_json::to_string_pretty(&listed).expect("detected list serialises");
    let scale = IntensityLevel::scale_text();
    let messages = template.render(&[
        ("theory", &theory_json),
        ("text", text),
        ("detected", &detected_json),
        ("scale", &scale),
    ])?;
    let exchange = gateway.complete(&messages).await?;
    let reply = extract_structured(&exchange.response_content)?;
    let (ratings, warnings) = interpret_rating_reply(&reply, detected, theory)?;
    Ok(RateOutcome {
        ratings,
        warnings,
        exchange,
    })
}

/// Maps a rating reply onto the detected values.
///
/// Ratings for undetected or unknown values and ratings with an unusable
/// intensity are dropped with a warning. Detected values left without a
/// rating get [`IntensityLevel::Neutral`]. Output order follows `detected`.
pub fn interpret_rating_reply(
    reply: &Value,
    detected: &[DetectionItem],
    theory: &ValueTheory,
) -> Result<(Vec<RatedValue>, Vec<String>), DetectionError> {
    let entries = reply_entries(reply, &["ratings", "values", "results"])?;
    let index = LabelIndex::new(theory);
    let mut slots: Vec<Option<RatedValue>> = vec![None; detected.len()];
    let mut warnings = Vec::new();

    for (i, entry) in entries.iter().enumerate() {
        let Some(obj) = entry.as_object() else {
            warnings.push(format!("rating entry {i} is not an object; skipped"));
            continue;
        };
        let Some(label) = label_of(obj) else {
            warnings.push(format!("rating entry {i} has no value label; skipped"));
            continue;
        };
        let Some(value_id) = index.resolve(label) else {
            warnings.push(format!("unmatched label {label:?} in ratings dropped"));
            continue;
        };
        let Some(slot) = detected.iter().position(|d| d.value_id == value_id) else {
            warnings.push(format!("rating for undetected value {value_id} dropped"));
            continue;
        };
        let raw_intensity = obj.get("intensity").and_then(Value::as_str).unwrap_or("");
        let intensity = match IntensityLevel::parse(raw_intensity) {
            Some(IntensityLevel::NoValues) => {
                warnings.push(format!("no_values is not a per-value level ({value_id}); rating dropped"));
                continue;
            }
            Some(level) => level,
            None => {
                warnings.push(format!("unrecognised intensity {raw_intensity:?} for {value_id}; rating dropped"));
                continue;
            }
        };
        if slots[slot].is_some() {
            warnings.push(format!("duplicate rating for {value_id}; first kept"));
            continue;
        }
        let justification = match obj.get("justification").and_then(Value::as_str).map(str::trim) {
            Some(j) if !j.is_empty() => j.to_string(),
            _ => {
                warnings.push(format!("rating for {value_id} has no justification"));
                MISSING_JUSTIFICATION.to_string()
            }
        };
        slots[slot] = Some(RatedValue {
            value_id: value_id.to_string(),
            intensity,
            justification,
        });
    }

    let ratings = slots
        .into_iter()
        .zip(detected)
        .map(|(slot, d)| {
            slot.unwrap_or_else(|| {
                warnings.push(format!("rating missing for {}; defaulted to neutral", d.value_id));
                RatedValue {
                    value_id: d.value_id.clone(),
                    intensity: IntensityLevel::Neutral,
                    justification: MISSING_RATING_JUSTIFICATION.to_string(),
                }
            })
        })
        .collect();
    Ok((ratings, warnings))
}
