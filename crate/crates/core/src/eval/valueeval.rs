//! Converter from the published ValueEval'24 layout to the canonical TSV.
//!
//! Input: `sentences.tsv` (`Text-ID`, `Sentence-ID`, `Text`) and
//! `labels.tsv` (`Text-ID`, `Sentence-ID`, then `<value> attained` and
//! `<value> constrained` score columns). A value is gold for a sentence when
//! either of its scores is at least 0.5. Output ids are
//! `<Text-ID>_<Sentence-ID>`.

use std::collections::{BTreeSet, HashMap};

use super::dataset::{DatasetError, LabeledSample};
use crate::value_spec::{canonicalize_label, ValueTheory};

pub const PRESENCE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Conversion {
    pub samples: Vec<LabeledSample>,
    pub warnings: Vec<String>,
}

fn reader(source: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .from_reader(source.as_bytes())
}

fn column(headers: &csv::StringRecord, name: &'static str) -> Result<usize, DatasetError> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or(DatasetError::MissingColumn(name))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

pub fn convert_valueeval(
    sentences: &str,
    labels: &str,
    theory: &ValueTheory,
) -> Result<Conversion, DatasetError> {
    let mut warnings = Vec::new();

    let mut label_reader = reader(labels);
    let headers = label_reader
        .headers()
        .map_err(|e| DatasetError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let text_col = column(&headers, "Text-ID")?;
    let sentence_col = column(&headers, "Sentence-ID")?;
    let mut value_cols: Vec<(usize, String)> = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if i == text_col || i == sentence_col {
            continue;
        }
        let base = h
            .trim()
            .strip_suffix(" attained")
            .or_else(|| h.trim().strip_suffix(" constrained"))
            .unwrap_or(h.trim());
        match canonicalize_label(base, theory) {
            Some(id) => value_cols.push((i, id)),
            None => warnings.push(format!("label column {h:?} names no value of the theory; ignored")),
        }
    }
    if value_cols.is_empty() {
        return Err(DatasetError::NoValueColumns(theory.theory_id.clone()));
    }

    let mut gold_by_key: HashMap<(String, String), BTreeSet<String>> = HashMap::new();
    for record in label_reader.records() {
        let record = record.map_err(|e| DatasetError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(DatasetError::Malformed {
                line: line_of(&record),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut gold = BTreeSet::new();
        for (i, id) in &value_cols {
            let raw = record[*i].trim();
            let score: f64 = raw.parse().map_err(|_| DatasetError::Malformed {
                line: line_of(&record),
                message: format!("score {raw:?} is not a number"),
            })?;
            if score >= PRESENCE_THRESHOLD {
                gold.insert(id.clone());
            }
        }
        let key = (
            record[text_col].trim().to_string(),
            record[sentence_col].trim().to_string(),
        );
        gold_by_key.insert(key, gold);
    }

    let mut sentence_reader = reader(sentences);
    let headers = sentence_reader
        .headers()
        .map_err(|e| DatasetError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let text_col = column(&headers, "Text-ID")?;
    let sentence_col = column(&headers, "Sentence-ID")?;
    let body_col = column(&headers, "Text")?;

    let mut samples = Vec::new();
    for record in sentence_reader.records() {
        let record = record.map_err(|e| DatasetError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let (Some(t), Some(s), Some(body)) = (
            record.get(text_col),
            record.get(sentence_col),
            record.get(body_col),
        ) else {
            return Err(DatasetError::Malformed {
                line: line_of(&record),
                message: "missing fields".into(),
            });
        };
        let key = (t.trim().to_string(), s.trim().to_string());
        let Some(gold) = gold_by_key.remove(&key) else {
            warnings.push(format!("sentence {}_{} has no labels; skipped", key.0, key.1));
            continue;
        };
        samples.push(LabeledSample {
            text_id: format!("{}_{}", key.0, key.1),
            text: super::dataset::flatten_field(body),
            gold,
        });
    }
    let mut orphans: Vec<_> = gold_by_key.into_keys().collect();
    orphans.sort();
    for (t, s) in orphans {
        warnings.push(format!("labels for {t}_{s} have no sentence; skipped"));
    }
    Ok(Conversion { samples, warnings })
}
