//! Theory-agnostic human value analysis.
//!
//! The crate turns foundational documents of a value theory into a
//! structured [`ValueTheory`], detects which of its values a text expresses,
//! grades each detected value on a seven-level intensity scale, and scores
//! detection quality against gold-labelled multi-label datasets.
//!
//! Module map:
//!
//! - [`value_spec`]: theory specification types, validation, canonical JSON
//!   codec, label canonicalisation and expert revisions.
//! - [`llm`]: chat-completion gateway (OpenAI-compatible, Ollama, scripted)
//!   and structured-output extraction.
//! - [`conceptualise`]: document sets, prompt templates, theory generation and
//!   repository change detection.
//! - [`detection`]: two-stage detect-then-rate analysis.
//! - [`orchestrator`]: snapshot store, analysis jobs and the HTTP API.
//! - [`eval`]: dataset ingestion, deterministic sampling, batch detection and
//!   micro-averaged metrics.

pub mod config;
pub mod conceptualise;
pub mod detection;
pub mod digest;
pub mod eval;
pub mod fixtures;
pub mod llm;
pub mod orchestrator;
pub mod value_spec;

pub use conceptualise::{
    conceptualise, detect_repo_changes, ConceptualiseError, ConceptualiseOptions, Document,
    DocumentSet, PromptTemplate, RepoChanges, TemplateKind, TemplateSet,
};
pub use detection::{
    analyze, detect_values, rate_intensity, AnalysisError, AnalysisReport, DetectionError,
    DetectionItem, IntensityLevel, RatedValue, Stage,
};
pub use eval::{
    compute_micro_metrics, load_dataset, run_batch, sample_subset, ConfusionCounts, Counts,
    LabeledSample, MetricsReport,
};
pub use llm::{
    extract_structured, BackendConfig, ChatExchange, ChatMessage, Flavor, LlmGateway, Role,
    ScriptedBackend,
};
pub use value_spec::{
    apply_expert_revision, canonicalize_label, deserialize_theory, serialize_theory,
    validate_theory, Edit, ManifestEntry, ValidationReport, ValueSpec, ValueTheory,
};
