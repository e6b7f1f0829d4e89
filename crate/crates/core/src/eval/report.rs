use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::batch::{BatchOutcome, FailedSample};
use super::metrics::{compute_micro_metrics, ConfusionCounts, LabelSets, MetricsError, ValueMetrics};
use super::LabeledSample;
use crate::llm::Flavor;
use crate::value_spec::to_canonical_json;

/// Everything needed to re-run an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub model: String,
    pub flavor: Flavor,
    pub temperature: f64,
    pub seed: i64,
    pub theory_id: String,
    pub theory_version: u64,
    pub dataset: String,
    pub dataset_size: usize,
    pub sample_size: usize,
    pub sample_seed: u64,
    pub parallelism: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub per_value: BTreeMap<String, ValueMetrics>,
    pub counts: ConfusionCounts,
    pub run_metadata: RunMetadata,
    /// Samples that entered the counts.
    pub evaluated: usize,
    /// Samples excluded because detection failed.
    pub failed: Vec<FailedSample>,
    /// The only field that differs between identical runs.
    pub generated_at_unix: u64,
}

impl MetricsReport {
    /// Scores the successful predictions of `outcome` against `samples`.
    pub fn from_batch(
        samples: &[LabeledSample],
        outcome: &BatchOutcome,
        run_metadata: RunMetadata,
    ) -> Result<Self, MetricsError> {
        let predicted: LabelSets = outcome
            .predictions
            .iter()
            .map(|p| (p.text_id.clone(), p.predicted.clone()))
            .collect();
        let gold: LabelSets = samples
            .iter()
            .filter(|s| predicted.contains_key(&s.text_id))
            .map(|s| (s.text_id.clone(), s.gold.clone()))
            .collect();
        let metrics = compute_micro_metrics(&gold, &predicted)?;
        Ok(Self {
            micro_precision: metrics.micro_precision,
            micro_recall: metrics.micro_recall,
            micro_f1: metrics.micro_f1,
            per_value: metrics.per_value,
            counts: metrics.counts,
            run_metadata,
            evaluated: predicted.len(),
            failed: outcome.failed.clone(),
            generated_at_unix: now_unix(),
        })
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Table,
}

pub fn emit_report(report: &MetricsReport, format: ReportFormat, path: &Path) -> std::io::Result<()> {
    let body = match format {
        ReportFormat::Json => to_canonical_json(report),
        ReportFormat::Table => render_table(std::slice::from_ref(report)),
    };
    std::fs::write(path, body)
}

pub fn parse_report(text: &str) -> serde_json::Result<MetricsReport> {
    serde_json::from_str(text)
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

/// Summary table (one row per report, best micro F1 first), then a
/// per-value section for each report that has per-value entries.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let mut ordered: Vec<&MetricsReport> = reports.iter().collect();
    ordered.sort_by(|a, b| b.micro_f1.total_cmp(&a.micro_f1));

    let mut out = String::new();
    out.push_str("| Model | Micro F1-score | Recall | Precision |\n");
    out.push_str("|---|---|---|---|\n");
    for r in &ordered {
        let _ = writeln!(
            out,
            "| {} | {:.4} | {} | {} |",
            r.run_metadata.model,
            r.micro_f1,
            pct(r.micro_recall),
            pct(r.micro_precision)
        );
    }
    for r in &ordered {
        if r.per_value.is_empty() {
            continue;
        }
        let _ = writeln!(out, "\nPer value ({}):", r.run_metadata.model);
        out.push_str("| Value | F1 | Recall | Precision | Support |\n");
        out.push_str("|---|---|---|---|---|\n");
        for (id, m) in &r.per_value {
            let _ = writeln!(
                out,
                "| {id} | {:.4} | {} | {} | {} |",
                m.f1,
                pct(m.recall),
                pct(m.precision),
                m.support
            );
        }
    }
    out
}
