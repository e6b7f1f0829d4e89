//! TOML configuration shared by the CLI and the service.
//!
//! ```toml
//! [backend]                  # defaults for every stage
//! flavor = "ollama_native"
//! model_name = "gemma3:27b"
//!
//! [backends.rate]            # per-stage overrides
//! model_name = "qwen3:32b"
//!
//! [paths]
//! theories = "theories"
//! templates = "templates"
//! results = "results"
//!
//! [documents]                # theory_id -> foundational documents
//! schwartz-refined = "docs/schwartz"
//!
//! [service]
//! listen = "127.0.0.1:8080"
//! poll_interval_secs = 300
//! parallelism = 4
//!
//! [evaluation]
//! sample_size = 7600
//! sample_seed = 42
//! max_failure_rate = 0.1
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::llm::{BackendConfig, Flavor};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_PARALLELISM: usize = 4;
pub const DEFAULT_MAX_FAILURE_RATE: f64 = 0.1;
pub const DEFAULT_SAMPLE_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {origin}: {message}")]
    Invalid { origin: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PipelineStage {
    Conceptualise,
    Detect,
    Rate,
}

impl PipelineStage {
    pub const ALL: [PipelineStage; 3] = [Self::Conceptualise, Self::Detect, Self::Rate];
}

impl fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Conceptualise => "conceptualise",
            Self::Detect => "detect",
            Self::Rate => "rate",
        })
    }
}

/// A partial [`BackendConfig`]; unset fields leave the target untouched.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendOverrides {
    pub flavor: Option<Flavor>,
    pub base_url: Option<String>,
    pub model_name: Option<String>,
    pub temperature: Option<f64>,
    pub seed: Option<i64>,
    pub timeout_ms: Option<u64>,
    pub max_retries: Option<u32>,
    pub retry_backoff_ms: Option<Vec<u64>>,
    pub api_key_env: Option<String>,
    pub script: Option<PathBuf>,
}

/// Environment variables read by [`BackendOverrides::from_env`].
pub const ENV_FLAVOR: &str = "VALUESCOPE_FLAVOR";
pub const ENV_BACKEND_URL: &str = "VALUESCOPE_BACKEND_URL";
pub const ENV_MODEL: &str = "VALUESCOPE_MODEL";
pub const ENV_TEMPERATURE: &str = "VALUESCOPE_TEMPERATURE";
pub const ENV_SEED: &str = "VALUESCOPE_SEED";
pub const ENV_SCRIPT: &str = "VALUESCOPE_SCRIPT";

impl BackendOverrides {
    /// Fields set in `top` win over fields set in `self`.
    pub fn layered(&self, top: &BackendOverrides) -> BackendOverrides {
        BackendOverrides {
            flavor: top.flavor.or(self.flavor),
            base_url: top.base_url.clone().or_else(|| self.base_url.clone()),
            model_name: top.model_name.clone().or_else(|| self.model_name.clone()),
            temperature: top.temperature.or(self.temperature),
            seed: top.seed.or(self.seed),
            timeout_ms: top.timeout_ms.or(self.timeout_ms),
            max_retries: top.max_retries.or(self.max_retries),
            retry_backoff_ms: top
                .retry_backoff_ms
                .clone()
                .or_else(|| self.retry_backoff_ms.clone()),
            api_key_env: top.api_key_env.clone().or_else(|| self.api_key_env.clone()),
            script: top.script.clone().or_else(|| self.script.clone()),
        }
    }

    pub fn apply(&self, target: &mut BackendConfig) {
        if let Some(v) = self.flavor {
            target.flavor = v;
        }
        if let Some(v) = &self.base_url {
            target.base_url = v.clone();
        }
        if let Some(v) = &self.model_name {
            target.model_name = v.clone();
        }
        if let Some(v) = self.temperature {
            target.temperature = v;
        }
        if let Some(v) = self.seed {
            target.seed = v;
        }
        if let Some(v) = self.timeout_ms {
            target.timeout_ms = v;
        }
        if let Some(v) = self.max_retries {
            target.max_retries = v;
        }
        if let Some(v) = &self.retry_backoff_ms {
            target.retry_backoff_ms = v.clone();
        }
        if let Some(v) = &self.api_key_env {
            target.api_key_env = v.clone();
        }
        if let Some(v) = &self.script {
            target.script = Some(v.clone());
        }
    }

    /// Reads the `VALUESCOPE_*` variables through `lookup`.
    pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let invalid = |name: &str, message: String| ConfigError::Invalid {
            origin: format!("environment variable {name}"),
            message,
        };
        let get = |name: &str| lookup(name).filter(|v| !v.trim().is_empty());
        Ok(Self {
            flavor: get(ENV_FLAVOR)
                .map(|v| v.parse().map_err(|e| invalid(ENV_FLAVOR, e)))
                .transpose()?,
            base_url: get(ENV_BACKEND_URL),
            model_name: get(ENV_MODEL),
            temperature: get(ENV_TEMPERATURE)
                .map(|v| v.trim().parse().map_err(|e| invalid(ENV_TEMPERATURE, format!("{e}"))))
                .transpose()?,
            seed: get(ENV_SEED)
                .map(|v| v.trim().parse().map_err(|e| invalid(ENV_SEED, format!("{e}"))))
                .transpose()?,
            script: get(ENV_SCRIPT).map(PathBuf::from),
            ..Self::default()
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let Some(p) = &self.script {
            self.script = Some(resolve(base, p));
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageOverrides {
    #[serde(default)]
    pub conceptualise: BackendOverrides,
    #[serde(default)]
    pub detect: BackendOverrides,
    #[serde(default)]
    pub rate: BackendOverrides,
}

impl StageOverrides {
    pub fn get(&self, stage: PipelineStage) -> &BackendOverrides {
        match stage {
            PipelineStage::Conceptualise => &self.conceptualise,
            PipelineStage::Detect => &self.detect,
            PipelineStage::Rate => &self.rate,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub theories: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub results: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: Option<String>,
    /// Repository poll interval; 0 or absent disables polling.
    pub poll_interval_secs: Option<u64>,
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub sample_size: Option<usize>,
    pub sample_seed: Option<u64>,
    pub max_failure_rate: Option<f64>,
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub backend: BackendOverrides,
    #[serde(default)]
    pub backends: StageOverrides,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub documents: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub service: ServiceConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: FileConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        config.backend.resolve_paths(base_dir);
        config.backends.conceptualise.resolve_paths(base_dir);
        config.backends.detect.resolve_paths(base_dir);
        config.backends.rate.resolve_paths(base_dir);
        for p in [
            &mut config.paths.theories,
            &mut config.paths.templates,
            &mut config.paths.results,
        ]
        .into_iter()
        .flatten()
        {
            *p = resolve(base_dir, p);
        }
        for p in config.documents.values_mut() {
            *p = resolve(base_dir, p);
        }
        if let Some(rate) = config.evaluation.max_failure_rate {
            if !(0.0..=1.0).contains(&rate) {
                return Err(ConfigError::Invalid {
                    origin: origin.to_string(),
                    message: format!("evaluation.max_failure_rate {rate} outside [0, 1]"),
                });
            }
        }
        Ok(config)
    }

    /// The file's view of one stage: `[backend]` overlaid by `[backends.<stage>]`.
    pub fn backend_for(&self, stage: PipelineStage) -> BackendOverrides {
        self.backend.layered(self.backends.get(stage))
    }
}

/// Fully resolved backends, one per stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageBackends {
    pub conceptualise: BackendConfig,
    pub detect: BackendConfig,
    pub rate: BackendConfig,
}

impl StageBackends {
    /// Defaults, then the file, then each layer of `overrides` in order
    /// (typically environment, then flags).
    pub fn resolve(file: &FileConfig, overrides: &[&BackendOverrides]) -> Self {
        let build = |stage| {
            let mut config = BackendConfig::default();
            file.backend_for(stage).apply(&mut config);
            for layer in overrides {
                layer.apply(&mut config);
            }
            config
        };
        Self {
            conceptualise: build(PipelineStage::Conceptualise),
            detect: build(PipelineStage::Detect),
            rate: build(PipelineStage::Rate),
        }
    }

    pub fn get(&self, stage: PipelineStage) -> &BackendConfig {
        match stage {
            PipelineStage::Conceptualise => &self.conceptualise,
            PipelineStage::Detect => &self.detect,
            PipelineStage::Rate => &self.rate,
        }
    }
}
