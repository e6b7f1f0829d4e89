//! Coordinates theory refreshes, analysis jobs and result delivery.
//!
//! Theories live in a [`TheoryStore`] of immutable snapshots. A job captures
//! the snapshot current at submission and keeps it for its whole run, so a
//! refresh or expert revision landing mid-flight only affects later jobs.
//! At most one refresh or revision per theory runs at a time.

mod api;
mod store;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{watch, Semaphore};

pub use api::{router, serve, ReviseRequest};
pub use store::{load_theory_file, write_atomic, StoreError, TheoryStore, TheorySummary};

use crate::conceptualise::{
    conceptualise, detect_repo_changes, ConceptualiseError, ConceptualiseOptions, DocumentSet,
    RepoChanges, TemplateSet,
};
use crate::config::StageBackends;
use crate::detection::{analyze, AnalysisReport, AnalysisStages, Stage};
use crate::llm::{GatewayError, LlmGateway};
use crate::value_spec::{apply_expert_revision, to_canonical_json, Edit, ValidationReport, ValueTheory};

/// One gateway per pipeline stage.
#[derive(Debug, Clone)]
pub struct Gateways {
    pub conceptualise: LlmGateway,
    pub detect: LlmGateway,
    pub rate: LlmGateway,
}

impl Gateways {
    pub fn from_configs(backends: &StageBackends) -> Result<Self, GatewayError> {
        Ok(Self {
            conceptualise: LlmGateway::from_config(backends.conceptualise.clone())?,
            detect: LlmGateway::from_config(backends.detect.clone())?,
            rate: LlmGateway::from_config(backends.rate.clone())?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct OrchestratorSettings {
    pub theories_dir: PathBuf,
    pub results_dir: PathBuf,
    /// Foundational document directory per theory id.
    pub documents: BTreeMap<String, PathBuf>,
    pub templates: TemplateSet,
    /// Maximum concurrently running analyses.
    pub parallelism: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    fn can_become(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running)
                | (JobState::Running, JobState::Done)
                | (JobState::Running, JobState::Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisRequest {
    #[serde(default)]
    pub text_id: Option<String>,
    pub text: String,
    pub theory_id: String,
    #[serde(default = "default_rate")]
    pub rate: bool,
}

fn default_rate() -> bool {
    true
}

/// `result` is present exactly when `state` is done; `error` and
/// `failed_stage` exactly when it is failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisJob {
    pub job_id: String,
    pub state: JobState,
    pub text_id: String,
    pub theory_id: String,
    /// Version of the snapshot captured at submission.
    pub theory_version: u64,
    pub rate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<AnalysisReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<Stage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RefreshOutcome {
    NoChange {
        theory_id: String,
        version: u64,
    },
    Updated {
        theory_id: String,
        version: u64,
        changes: RepoChanges,
        /// The replaced snapshot carried expert revisions that the
        /// regenerated theory does not keep.
        discarded_expert_revision: bool,
    },
}

#[derive(Debug, Error)]
pub enum RefreshError {
    #[error("no document directory configured for theory {0:?}")]
    NoDocuments(String),
    #[error("conceptualisation of {theory_id:?} failed, previous snapshot kept: {source}")]
    Conceptualise {
        theory_id: String,
        #[source]
        source: ConceptualiseError,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Error)]
pub enum ReviseError {
    #[error("unknown theory {0:?}")]
    NotFound(String),
    #[error("stale revision: based on version {base}, current version is {current}")]
    Stale { base: u64, current: u64 },
    #[error("revision rejected: {0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Store(StoreError),
}

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error("unknown theory {0:?}")]
    UnknownTheory(String),
    #[error("text is empty")]
    EmptyText,
}

struct Inner {
    store: TheoryStore,
    settings: OrchestratorSettings,
    gateways: Gateways,
    jobs: RwLock<HashMap<String, AnalysisJob>>,
    theory_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    permits: Semaphore,
    in_flight: watch::Sender<usize>,
}

/// Cheap to clone; clones share state.
#[derive(Clone)]
pub struct Orchestrator {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Orchestrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Orchestrator")
            .field("theories", &self.inner.store.root())
            .field("results", &self.inner.settings.results_dir)
            .finish_non_exhaustive()
    }
}

impl Orchestrator {
    pub fn new(settings: OrchestratorSettings, gateways: Gateways) -> Result<Self, StoreError> {
        let store = TheoryStore::open(&settings.theories_dir)?;
        std::fs::create_dir_all(&settings.results_dir).map_err(|source| StoreError::Io {
            path: settings.results_dir.clone(),
            source,
        })?;
        let permits = Semaphore::new(settings.parallelism.max(1));
        Ok(Self {
            inner: Arc::new(Inner {
                store,
                settings,
                gateways,
                jobs: RwLock::new(HashMap::new()),
                theory_locks: Mutex::new(HashMap::new()),
                permits,
                in_flight: watch::channel(0).0,
            }),
        })
    }

    pub fn store(&self) -> &TheoryStore {
        &self.inner.store
    }

    pub fn theory_ids_with_documents(&self) -> Vec<String> {
        self.inner.settings.documents.keys().cloned().collect()
    }

    fn theory_lock(&self, theory_id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.inner.theory_locks.lock().expect("lock table");
        Arc::clone(locks.entry(theory_id.to_string()).or_default())
    }

    /// Regenerates a theory from its documents when they changed since the
    /// installed snapshot (or when none is installed).
    pub async fn refresh_specs(&self, theory_id: &str) -> Result<RefreshOutcome, RefreshError> {
        let dir = self
            .inner
            .settings
            .documents
            .get(theory_id)
            .ok_or_else(|| RefreshError::NoDocuments(theory_id.to_string()))?;
        let lock = self.theory_lock(theory_id);
        let _guard = lock.lock().await;

        let failed = |source| RefreshError::Conceptualise {
            theory_id: theory_id.to_string(),
            source,
        };
        let docs = DocumentSet::load_dir(dir).map_err(failed)?;
        let current = self.inner.store.get(theory_id);
        let changes = match &current {
            Some(snapshot) => detect_repo_changes(&snapshot.source_manifest, &docs),
            None => detect_repo_changes(&[], &docs),
        };
        if let Some(snapshot) = &current {
            if changes.is_empty() {
                return Ok(RefreshOutcome::NoChange {
                    theory_id: theory_id.to_string(),
                    version: snapshot.version,
                });
            }
        }

        let mut options = ConceptualiseOptions::new(theory_id);
        options.fallback_name = current.as_ref().map(|t| t.name.clone());
        let generated = conceptualise(
            &docs,
            &self.inner.settings.templates.conceptualise,
            &self.inner.gateways.conceptualise,
            &options,
        )
        .await
        .map_err(failed)?;

        let mut theory = generated.theory;
        theory.version = current.as_ref().map_or(1, |t| t.version + 1);
        let installed = self.inner.store.install(theory)?;
        tracing::info!(theory_id, version = installed.version, "theory refreshed");
        Ok(RefreshOutcome::Updated {
            theory_id: theory_id.to_string(),
            version: installed.version,
            changes,
            discarded_expert_revision: current.is_some_and(|t| t.revised_by_expert),
        })
    }

    /// Applies expert edits to the current snapshot. With `base_version`
    /// set, the edit is refused unless it still names the current version.
    pub async fn revise(
        &self,
        theory_id: &str,
        base_version: Option<u64>,
        edits: &[Edit],
    ) -> Result<Arc<ValueTheory>, ReviseError> {
        let lock = self.theory_lock(theory_id);
        let _guard = lock.lock().await;
        let current = self
            .inner
            .store
            .get(theory_id)
            .ok_or_else(|| ReviseError::NotFound(theory_id.to_string()))?;
        if let Some(base) = base_version {
            if base != current.version {
                return Err(ReviseError::Stale {
                    base,
                    current: current.version,
                });
            }
        }
        let revised = apply_expert_revision(&current, edits)
            .map_err(|e| ReviseError::Invalid(e.report().clone()))?;
        self.inner.store.install(revised).map_err(|e| match e {
            StoreError::Invalid(report) => ReviseError::Invalid(report),
            other => ReviseError::Store(other),
        })
    }

    /// Queues an analysis against the snapshot current right now.
    pub fn submit(&self, request: AnalysisRequest) -> Result<String, SubmitError> {
        if request.text.trim().is_empty() {
            return Err(SubmitError::EmptyText);
        }
        let snapshot = self
            .inner
            .store
            .get(&request.theory_id)
            .ok_or_else(|| SubmitError::UnknownTheory(request.theory_id.clone()))?;
        let job_id = uuid::Uuid::new_v4().to_string();
        let text_id = request.text_id.clone().unwrap_or_else(|| job_id.clone());
        let job = AnalysisJob {
            job_id: job_id.clone(),
            state: JobState::Queued,
            text_id: text_id.clone(),
            theory_id: snapshot.theory_id.clone(),
            theory_version: snapshot.version,
            rate: request.rate,
            result: None,
            error: None,
            failed_stage: None,
        };
        self.inner
            .jobs
            .write()
            .expect("job table")
            .insert(job_id.clone(), job);
        self.inner.in_flight.send_modify(|n| *n += 1);

        let this = self.clone();
        let id = job_id.clone();
        tokio::spawn(async move {
            this.run_job(&id, &text_id, &request.text, snapshot, request.rate)
                .await;
            this.inner.in_flight.send_modify(|n| *n -= 1);
        });
        Ok(job_id)
    }

    async fn run_job(&self, job_id: &str, text_id: &str, text: &str, snapshot: Arc<ValueTheory>, rate: bool) {
        let _permit = self.inner.permits.acquire().await.expect("semaphore open");
        self.transition(job_id, JobState::Running, |_| {});

        let stages = AnalysisStages {
            templates: &self.inner.settings.templates,
            detect: &self.inner.gateways.detect,
            rate: rate.then_some(&self.inner.gateways.rate),
        };
        let job = match analyze(text_id, text, &snapshot, &stages).await {
            Ok(analysis) => self.transition(job_id, JobState::Done, |job| {
                job.result = Some(analysis.report);
            }),
            Err(e) => {
                tracing::warn!(job_id, error = %e, "analysis failed");
                self.transition(job_id, JobState::Failed, |job| {
                    job.failed_stage = Some(e.stage);
                    job.error = Some(e.to_string());
                })
            }
        };
        if let Some(job) = job {
            let path = self.result_path(job_id);
            if let Err(e) = write_atomic(&path, to_canonical_json(&job).as_bytes()) {
                tracing::error!(job_id, path = %path.display(), error = %e, "cannot persist job result");
            }
        }
    }

    /// Moves a job to `next`, applying `update`; illegal transitions are
    /// ignored. Returns the updated job.
    fn transition(
        &self,
        job_id: &str,
        next: JobState,
        update: impl FnOnce(&mut AnalysisJob),
    ) -> Option<AnalysisJob> {
        let mut jobs = self.inner.jobs.write().expect("job table");
        let job = jobs.get_mut(job_id)?;
        if !job.state.can_become(next) {
            tracing::error!(job_id, from = ?job.state, to = ?next, "illegal job transition");
            return None;
        }
        job.state = next;
        update(job);
        Some(job.clone())
    }

    fn result_path(&self, job_id: &str) -> PathBuf {
        self.inner.settings.results_dir.join(format!("{job_id}.json"))
    }

    /// Current job state; finished jobs from earlier runs are read from the
    /// results directory.
    pub fn job(&self, job_id: &str) -> Option<AnalysisJob> {
        if let Some(job) = self.inner.jobs.read().expect("job table").get(job_id) {
            return Some(job.clone());
        }
        if uuid::Uuid::parse_str(job_id).is_err() {
            return None;
        }
        let text = std::fs::read_to_string(self.result_path(job_id)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Waits until every submitted job has finished.
    pub async fn drain(&self) {
        let mut rx = self.inner.in_flight.subscribe();
        let _ = rx.wait_for(|n| *n == 0).await;
    }

    /// Polls every theory with configured documents once per `interval`.
    pub fn spawn_monitor(&self, interval: Duration) -> tokio::task::JoinHandle<()> {
        let this = self.clone();
        tokio::spawn(async move {
            let mut ticker = tokio::time::interval(interval);
            ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                ticker.tick().await;
                for theory_id in this.theory_ids_with_documents() {
                    match this.refresh_specs(&theory_id).await {
                        Ok(RefreshOutcome::NoChange { .. }) => {}
                        Ok(outcome) => tracing::info!(?outcome, "repository change applied"),
                        Err(e) => tracing::warn!(theory_id, error = %e, "refresh failed"),
                    }
                }
            }
        })
    }
}
