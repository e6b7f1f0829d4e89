use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_SEED: i64 = 42;
pub const DEFAULT_OLLAMA_URL: &str = "http://127.0.0.1:11434";
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// `POST {base_url}/chat/completions`
    OpenaiCompatible,
    /// `POST {base_url}/api/chat`
    OllamaNative,
    /// In-process canned replies loaded from `script`.
    Scripted,
}

impl Flavor {
    pub fn as_str(self) -> &'static str {
        match self {
            Flavor::OpenaiCompatible => "openai_compatible",
            Flavor::OllamaNative => "ollama_native",
            Flavor::Scripted => "scripted",
        }
    }
}

impl std::str::FromStr for Flavor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "openai_compatible" | "openai" => Ok(Flavor::OpenaiCompatible),
            "ollama_native" | "ollama" => Ok(Flavor::OllamaNative),
            "scripted" => Ok(Flavor::Scripted),
            other => Err(format!(
                "unknown flavor {other:?} (expected openai_compatible, ollama_native or scripted)"
            )),
        }
    }
}

/// Connection and sampling settings for one inference backend.
///
/// Durations are stored in milliseconds so that config files stay plain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub flavor: Flavor,
    #[serde(default = "default_base_url")]
    pub base_url: String,
    #[serde(default)]
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_seed")]
    pub seed: i64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Delay before retry `i` is `retry_backoff_ms[min(i, len - 1)]`.
    #[serde(default = "default_backoff")]
    pub retry_backoff_ms: Vec<u64>,
    /// Environment variable holding the bearer token (openai_compatible).
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    /// Script file for the scripted flavor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
}

fn default_base_url() -> String {
    DEFAULT_OLLAMA_URL.to_string()
}
fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}
fn default_seed() -> i64 {
    DEFAULT_SEED
}
fn default_timeout_ms() -> u64 {
    120_000
}
fn default_max_retries() -> u32 {
    2
}
fn default_backoff() -> Vec<u64> {
    vec![500, 2_000, 8_000]
}
fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            flavor: Flavor::OllamaNative,
            base_url: default_base_url(),
            model_name: String::new(),
            temperature: DEFAULT_TEMPERATURE,
            seed: DEFAULT_SEED,
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            retry_backoff_ms: default_backoff(),
            api_key_env: default_api_key_env(),
            script: None,
        }
    }
}

impl BackendConfig {
    pub fn scripted(script: impl Into<PathBuf>) -> Self {
        Self {
            flavor: Flavor::Scripted,
            model_name: "scripted".into(),
            script: Some(script.into()),
            ..Self::default()
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn backoff(&self, retry: u32) -> Duration {
        match self.retry_backoff_ms.as_slice() {
            [] => Duration::ZERO,
            s => Duration::from_millis(s[(retry as usize).min(s.len() - 1)]),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.temperature.is_finite() || !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        match self.flavor {
            Flavor::Scripted => {
                if self.script.is_none() {
                    return Err("scripted flavor requires a script file".into());
                }
            }
            Flavor::OpenaiCompatible | Flavor::OllamaNative => {
                if self.base_url.trim().is_empty() {
                    return Err("base_url is required".into());
                }
                if self.model_name.trim().is_empty() {
                    return Err("model_name is required".into());
                }
            }
        }
        Ok(())
    }
}
