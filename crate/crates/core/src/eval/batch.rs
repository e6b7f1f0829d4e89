use std::collections::BTreeSet;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::LabeledSample;
use crate::conceptualise::PromptTemplate;
use crate::detection::detect_values;
use crate::llm::LlmGateway;
use crate::value_spec::ValueTheory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchOptions {
    /// Concurrent detection calls; values below 1 are treated as 1.
    pub parallelism: usize,
    /// Largest tolerated fraction of failed samples, in `[0, 1]`.
    pub max_failure_rate: f64,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            parallelism: 4,
            max_failure_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub text_id: String,
    pub predicted: BTreeSet<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedSample {
    pub text_id: String,
    pub error: String,
}

/// Predictions and failures, both in input order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchOutcome {
    pub predictions: Vec<SamplePrediction>,
    pub failed: Vec<FailedSample>,
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("batch aborted: {failed} of {total} samples failed, above the tolerated rate {max_rate}; first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        max_rate: f64,
        first: String,
    },
}

/// Runs detection (rating disabled) over every sample.
///
/// Only the sample text reaches the model; gold labels never leave this
/// function. Per-sample errors are collected; once the failure fraction is
/// certain to exceed `max_failure_rate` the batch stops and errors.
pub async fn run_batch(
    samples: &[LabeledSample],
    theory: &ValueTheory,
    template: &PromptTemplate,
    gateway: &LlmGateway,
    options: BatchOptions,
) -> Result<BatchOutcome, BatchError> {
    let total = samples.len();
    let allowed_failures = (options.max_failure_rate * total as f64).floor() as usize;

    let mut results = stream::iter(samples.iter().enumerate())
        .map(|(i, sample)| async move {
            let outcome = detect_values(&sample.text, theory, template, gateway).await;
            (i, outcome)
        })
        .buffer_unordered(options.parallelism.max(1));

    let mut slots: Vec<Option<Result<SamplePrediction, FailedSample>>> = vec![None; total];
    let mut failures = 0usize;
    while let Some((i, outcome)) = results.next().await {
        let text_id = samples[i].text_id.clone();
        slots[i] = Some(match outcome {
            Ok(o) => Ok(SamplePrediction {
                text_id,
                predicted: o.items.into_iter().map(|d| d.value_id).collect(),
                warnings: o.warnings,
            }),
            Err(e) => {
                failures += 1;
                tracing::warn!(text_id = %text_id, error = %e, "sample failed");
                Err(FailedSample {
                    text_id,
                    error: e.to_string(),
                })
            }
        });
        if failures > allowed_failures {
            let first = slots
                .iter()
                .flatten()
                .find_map(|r| r.as_ref().err())
                .map(|f| format!("{}: {}", f.text_id, f.error))
                .unwrap_or_default();
            return Err(BatchError::TooManyFailures {
                failed: failures,
                total,
                max_rate: options.max_failure_rate,
                first,
            });
        }
    }

    let mut outcome = BatchOutcome::default();
    for slot in slots.into_iter().flatten() {
        match slot {
            Ok(p) => outcome.predictions.push(p),
            Err(f) => outcome.failed.push(f),
        }
    }
    Ok(outcome)
}
