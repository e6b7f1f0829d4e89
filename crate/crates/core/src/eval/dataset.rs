//! Canonical TSV datasets.
//!
//! Layout: a header row, then one row per sample. The header must contain
//! `text_id` and `text`; every other column names a value (by id or name,
//! canonicalised against the theory) and holds `0` or `1`. Fields are not
//! quoted, so texts must not contain tabs or newlines.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value_spec::{canonicalize_label, ValueTheory};

pub const TEXT_ID_COLUMN: &str = "text_id";
pub const TEXT_COLUMN: &str = "text";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub text_id: String,
    pub text: String,
    pub gold: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based line number in the source file.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    /// Value ids that have a column, in column order.
    pub value_columns: Vec<String>,
    pub warnings: Vec<String>,
    pub rejected: Vec<RejectedRow>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset has no header row")]
    MissingHeader,
    #[error("header lacks the required column {0:?}")]
    MissingColumn(&'static str),
    #[error("header has no column that names a value of theory {0:?}")]
    NoValueColumns(String),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
}

pub fn load_dataset(path: &Path, theory: &ValueTheory) -> Result<Dataset, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, theory)
}

enum Column {
    TextId,
    Text,
    Value(usize),
    Ignored,
}

pub fn parse_dataset(source: &str, theory: &ValueTheory) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(false)
        .flexible(true)
        .from_reader(source.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        None => return Err(DatasetError::MissingHeader),
        Some(Err(e)) => return Err(malformed(1, e)),
        Some(Ok(h)) => h,
    };
    if header.iter().all(|f| f.trim().is_empty()) {
        return Err(DatasetError::MissingHeader);
    }

    let mut dataset = Dataset::default();
    let mut columns = Vec::with_capacity(header.len());
    for raw in header.iter() {
        let name = raw.trim();
        let column = if name.eq_ignore_ascii_case(TEXT_ID_COLUMN) {
            Column::TextId
        } else if name.eq_ignore_ascii_case(TEXT_COLUMN) {
            Column::Text
        } else {
            match canonicalize_label(name, theory) {
                Some(id) if dataset.value_columns.contains(&id) => {
                    dataset
                        .warnings
                        .push(format!("column {name:?} repeats value {id}; ignored"));
                    Column::Ignored
                }
                Some(id) => {
                    dataset.value_columns.push(id);
                    Column::Value(dataset.value_columns.len() - 1)
                }
                None => {
                    dataset
                        .warnings
                        .push(format!("column {name:?} names no value of the theory; ignored"));
                    Column::Ignored
                }
            }
        };
        columns.push(column);
    }
    if !columns.iter().any(|c| matches!(c, Column::TextId)) {
        return Err(DatasetError::MissingColumn(TEXT_ID_COLUMN));
    }
    if !columns.iter().any(|c| matches!(c, Column::Text)) {
        return Err(DatasetError::MissingColumn(TEXT_COLUMN));
    }
    if dataset.value_columns.is_empty() {
        return Err(DatasetError::NoValueColumns(theory.theory_id.clone()));
    }

    let mut seen_ids = HashSet::new();
    for record in records {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                dataset.rejected.push(RejectedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        match parse_row(&record, &columns, &dataset.value_columns) {
            Ok(sample) if !seen_ids.insert(sample.text_id.clone()) => {
                dataset.rejected.push(RejectedRow {
                    line,
                    reason: format!("duplicate text_id {:?}", sample.text_id),
                });
            }
            Ok(sample) => dataset.samples.push(sample),
            Err(reason) => dataset.rejected.push(RejectedRow { line, reason }),
        }
    }
    Ok(dataset)
}

fn parse_row(
    record: &csv::StringRecord,
    columns: &[Column],
    value_columns: &[String],
) -> Result<LabeledSample, String> {
    if record.len() != columns.len() {
        return Err(format!(
            "expected {} fields, found {}",
            columns.len(),
            record.len()
        ));
    }
    let mut text_id = "";
    let mut text = "";
    let mut gold = BTreeSet::new();
    for (field, column) in record.iter().zip(columns) {
        match column {
            Column::TextId => text_id = field.trim(),
            Column::Text => text = field,
            Column::Value(i) => match field.trim() {
                "1" => {
                    gold.insert(value_columns[*i].clone());
                }
                "0" => {}
                other => {
                    return Err(format!(
                        "label for {} must be 0 or 1, found {other:?}",
                        value_columns[*i]
                    ))
                }
            },
            Column::Ignored => {}
        }
    }
    if text_id.is_empty() {
        return Err("empty text_id".into());
    }
    if text.trim().is_empty() {
        return Err(format!("empty text for {text_id:?}"));
    }
    Ok(LabeledSample {
        text_id: text_id.to_string(),
        text: text.to_string(),
        gold,
    })
}

fn malformed(line: u64, e: impl std::fmt::Display) -> DatasetError {
    DatasetError::Malformed {
        line,
        message: e.to_string(),
    }
}

/// Writes samples in the canonical layout with one column per theory value.
pub fn write_dataset(samples: &[LabeledSample], theory: &ValueTheory) -> String {
    let ids: Vec<&str> = theory.value_ids().collect();
    let mut out = String::new();
    out.push_str(TEXT_ID_COLUMN);
    out.push('\t');
    out.push_str(TEXT_COLUMN);
    for id in &ids {
        out.push('\t');
        out.push_str(id);
    }
    out.push('\n');
    for s in samples {
        out.push_str(&flatten_field(&s.text_id));
        out.push('\t');
        out.push_str(&flatten_field(&s.text));
        for id in &ids {
            out.push('\t');
            out.push(if s.gold.contains(*id) { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

/// Replaces tabs and line breaks so a field fits the unquoted layout.
pub fn flatten_field(raw: &str) -> String {
    raw.split(['\t', '\n', '\r'])
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}
