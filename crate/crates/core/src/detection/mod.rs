//! Two-stage value analysis: detect which values a text expresses, then
//! grade each detected value on the [`IntensityLevel`] scale.
//!
//! Model replies are untrusted. Unknown labels, evidence that does not occur
//! in the text, and unusable ratings are dropped and recorded as warnings so
//! that one bad reply never aborts a batch; only transport and extraction
//! failures are errors.

mod detect;
mod intensity;
mod rate;
mod report;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detect::{detect_values, interpret_detection_reply, normalize_for_match, DetectOutcome};
pub use intensity::IntensityLevel;
pub use rate::{
    interpret_rating_reply, rate_intensity, RateOutcome, MISSING_JUSTIFICATION,
    MISSING_RATING_JUSTIFICATION,
};
pub use report::{AnalysisReport, DetectionItem, ModelMetadata, RatedValue, StageModel};

use crate::conceptualise::{TemplateError, TemplateSet};
use crate::llm::{ChatExchange, ExtractError, GatewayError, LlmGateway};
use crate::value_spec::ValueTheory;

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("input text is empty")]
    EmptyText,
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("gateway: {0}")]
    Gateway(#[from] GatewayError),
    #[error("extraction: {0}")]
    Extraction(#[from] ExtractError),
    #[error("unusable reply: {0}")]
    MalformedReply(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Detect,
    Rate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Detect => "detect",
            Stage::Rate => "rate",
        })
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct AnalysisError {
    pub stage: Stage,
    #[source]
    pub source: DetectionError,
}

/// Templates and gateways for one analysis. `rate: None` disables rating.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisStages<'a> {
    pub templates: &'a TemplateSet,
    pub detect: &'a LlmGateway,
    pub rate: Option<&'a LlmGateway>,
}

/// An analysis report together with the raw exchanges that produced it.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub exchanges: Vec<ChatExchange>,
}

pub async fn analyze(
    text_id: &str,
    text: &str,
    theory: &ValueTheory,
    stages: &AnalysisStages<'_>,
) -> Result<Analysis, AnalysisError> {
    let at = |stage| move |source| AnalysisError { stage, source };

    let detection = detect_values(text, theory, &stages.templates.detect, stages.detect)
        .await
        .map_err(at(Stage::Detect))?;
    let mut warnings: Vec<String> = detection
        .warnings
        .iter()
        .map(|w| format!("detect: {w}"))
        .collect();
    let mut exchanges = vec![detection.exchange];

    let ratings = match stages.rate {
        None => None,
        Some(_) if detection.items.is_empty() => Some(Vec::new()),
        Some(gateway) => {
            let rated = rate_intensity(text, &detection.items, theory, &stages.templates.rate, gateway)
                .await
                .map_err(at(Stage::Rate))?;
            warnings.extend(rated.warnings.iter().map(|w| format!("rate: {w}")));
            exchanges.push(rated.exchange);
            Some(rated.ratings)
        }
    };

    let report = AnalysisReport {
        text_id: text_id.to_string(),
        input_text: text.to_string(),
        theory_id: theory.theory_id.clone(),
        theory_version: theory.version,
        no_values_flag: detection.items.is_empty(),
        detected: detection.items,
        ratings,
        model_metadata: ModelMetadata {
            detect: StageModel::from(stages.detect.config()),
            rate: stages.rate.map(|g| StageModel::from(g.config())),
        },
        warnings,
    };
    debug_assert!(report.check_invariants().is_ok());
    Ok(Analysis { report, exchanges })
}
