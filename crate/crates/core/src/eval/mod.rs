//! Batch evaluation against gold-labelled datasets: canonical TSV loading,
//! deterministic subsampling, detection over many texts and micro-averaged
//! precision, recall and F1.

mod batch;
mod dataset;
mod metrics;
mod report;
mod sampling;
mod valueeval;

pub use batch::{run_batch, BatchError, BatchOptions, BatchOutcome, FailedSample, SamplePrediction};
pub use dataset::{
    flatten_field, load_dataset, parse_dataset, write_dataset, Dataset, DatasetError, LabeledSample,
    RejectedRow, TEXT_COLUMN, TEXT_ID_COLUMN,
};
pub use metrics::{
    compute_micro_metrics, harmonic_mean, ConfusionCounts, Counts, LabelSets, Metrics, MetricsError,
    ValueMetrics,
};
pub use report::{emit_report, parse_report, render_table, MetricsReport, ReportFormat, RunMetadata};
pub use sampling::{sample_indices, sample_subset, SampleSizeError, SplitMix64};
pub use valueeval::{convert_valueeval, Conversion, PRESENCE_THRESHOLD};
