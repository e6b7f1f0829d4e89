//! Human-readable rendering of analysis reports.

use std::fmt::Write as _;

use valuescope_core::detection::StageModel;
use valuescope_core::{AnalysisReport, IntensityLevel, ValueTheory};

fn cell(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").replace('|', "\\|")
}

fn quoted(evidence: &[String]) -> String {
    if evidence.is_empty() {
        return "(none quoted)".into();
    }
    evidence
        .iter()
        .map(|e| format!("\"{}\"", cell(e)))
        .collect::<Vec<_>>()
        .join("; ")
}

fn stage(name: &str, m: &StageModel) -> String {
    format!(
        "{name}={} ({}) temperature={} seed={}",
        m.model,
        m.flavor.as_str(),
        m.temperature,
        m.seed
    )
}

/// Value, intensity and justification per detected value, followed by the
/// quoted evidence and the model settings that produced the report.
pub fn analysis(report: &AnalysisReport, theory: &ValueTheory) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Text {} against {} v{}",
        report.text_id, report.theory_id, report.theory_version
    );
    out.push('\n');

    if report.no_values_flag {
        let _ = writeln!(
            out,
            "{} ({}): no values detected",
            IntensityLevel::NoValues.label(),
            IntensityLevel::NoValues.glyph()
        );
    } else if let Some(ratings) = &report.ratings {
        out.push_str("| Value | Intensity | Justification |\n");
        out.push_str("|---|---|---|\n");
        for r in ratings {
            let _ = writeln!(
                out,
                "| {} | {} ({}) | {} |",
                cell(&theory.display_label(&r.value_id)),
                r.intensity.label(),
                r.intensity.glyph(),
                cell(&r.justification)
            );
        }
    } else {
        out.push_str("| Value | Evidence |\n");
        out.push_str("|---|---|\n");
        for d in &report.detected {
            let _ = writeln!(
                out,
                "| {} | {} |",
                cell(&theory.display_label(&d.value_id)),
                quoted(&d.evidence)
            );
        }
    }

    if report.ratings.is_some() && !report.detected.is_empty() {
        out.push_str("\nEvidence:\n");
        for d in &report.detected {
            let _ = writeln!(out, "- {}: {}", d.value_id, quoted(&d.evidence));
        }
    }
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }

    let meta = &report.model_metadata;
    let mut run = stage("detect", &meta.detect);
    if let Some(rate) = &meta.rate {
        run.push_str("; ");
        run.push_str(&stage("rate", rate));
    }
    let _ = writeln!(out, "\nrun: {run}");
    out
}
