//! Chat-completion gateway and structured-output extraction.
//!
//! [`LlmGateway`] wraps one [`ChatBackend`] with the retry policy from its
//! [`BackendConfig`]: transient failures (timeouts, connection errors, 5xx)
//! are retried up to `max_retries` times; everything else fails at once.
//! Every call yields a [`ChatExchange`] recording the request verbatim.

mod config;
mod extract;
mod http;
mod scripted;

use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    BackendConfig, Flavor, DEFAULT_API_KEY_ENV, DEFAULT_OLLAMA_URL, DEFAULT_SEED,
    DEFAULT_TEMPERATURE,
};
pub use extract::{extract_structured, ExtractError};
pub use http::{OllamaBackend, OpenAiBackend};
pub use scripted::{ScriptEntry, ScriptError, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

/// Audit record of one completed call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub request: Vec<ChatMessage>,
    pub response_content: String,
    pub latency_ms: u64,
    pub attempt_count: u32,
    pub token_usage: Option<TokenUsage>,
    /// Diagnostics of the attempts that failed before the successful one.
    pub failed_attempts: Vec<String>,
}

/// What a backend sees for a single attempt.
#[derive(Debug, Clone)]
pub struct ChatRequest<'a> {
    pub model: &'a str,
    pub messages: &'a [ChatMessage],
    pub temperature: f64,
    pub seed: i64,
}

impl ChatRequest<'_> {
    /// All user message contents joined by newlines.
    pub fn user_prompt(&self) -> String {
        self.messages
            .iter()
            .filter(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendReply {
    pub content: String,
    pub usage: Option<TokenUsage>,
}

/// Failure of a single attempt, classified for the retry policy.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttemptError {
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn send(&self, request: &ChatRequest<'_>) -> Result<BackendReply, AttemptError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("no messages to send")]
    EmptyMessages,
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("request failed on attempt {attempts}: {detail}")]
    Fatal { attempts: u32, detail: String },
}

/// A configured client for one backend. Cheap to clone and safe to share.
#[derive(Clone)]
pub struct LlmGateway {
    config: BackendConfig,
    backend: Arc<dyn ChatBackend>,
}

impl std::fmt::Debug for LlmGateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmGateway")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl LlmGateway {
    /// Builds the backend named by `config.flavor`.
    pub fn from_config(config: BackendConfig) -> Result<Self, GatewayError> {
        config.validate().map_err(GatewayError::InvalidConfig)?;
        let backend: Arc<dyn ChatBackend> = match config.flavor {
            Flavor::OpenaiCompatible => Arc::new(
                OpenAiBackend::new(&config).map_err(GatewayError::InvalidConfig)?,
            ),
            Flavor::OllamaNative => Arc::new(
                OllamaBackend::new(&config).map_err(GatewayError::InvalidConfig)?,
            ),
            Flavor::Scripted => {
                let path = config.script.as_ref().expect("validated");
                Arc::new(
                    ScriptedBackend::load(path)
                        .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?,
                )
            }
        };
        Ok(Self { config, backend })
    }

    /// Uses `backend` in place of the one `config.flavor` would build.
    pub fn with_backend(config: BackendConfig, backend: Arc<dyn ChatBackend>) -> Self {
        Self { config, backend }
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub async fn complete(&self, messages: &[ChatMessage]) -> Result<ChatExchange, GatewayError> {
        if messages.is_empty() {
            return Err(GatewayError::EmptyMessages);
        }
        let request = ChatRequest {
            model: &self.config.model_name,
            messages,
            temperature: self.config.temperature,
            seed: self.config.seed,
        };
        let started = Instant::now();
        let mut failed_attempts = Vec::new();
        let max_attempts = self.config.max_retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.backend.send(&request).await {
                Ok(reply) => {
                    return Ok(ChatExchange {
                        request: messages.to_vec(),
                        response_content: reply.content,
                        latency_ms: elapsed_ms(started.elapsed()),
                        attempt_count: attempt,
                        token_usage: reply.usage,
                        failed_attempts,
                    })
                }
                Err(AttemptError::Fatal(detail)) => {
                    return Err(GatewayError::Fatal {
                        attempts: attempt,
                        detail,
                    })
                }
                Err(AttemptError::Transient(detail)) => {
                    tracing::debug!(attempt, %detail, "transient backend failure");
                    if attempt >= max_attempts {
                        return Err(GatewayError::RetriesExhausted {
                            attempts: attempt,
                            last: detail,
                        });
                    }
                    failed_attempts.push(detail);
                    tokio::time::sleep(self.config.backoff(attempt - 1)).await;
                }
            }
        }
    }
}

fn elapsed_ms(d: Duration) -> u64 {
    u64::try_from(d.as_millis()).unwrap_or(u64::MAX)
}

/// Convenience wrapper: build a gateway for `config` and send `messages`.
pub async fn complete(
    config: &BackendConfig,
    messages: &[ChatMessage],
) -> Result<ChatExchange, GatewayError> {
    LlmGateway::from_config(config.clone())?.complete(messages).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        calls: AtomicU32,
        fail_first: u32,
        error: AttemptError,
    }

    #[async_trait]
    impl ChatBackend for Flaky {
        async fn send(&self, _: &ChatRequest<'_>) -> Result<BackendReply, AttemptError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(self.error.clone())
            } else {
                Ok(BackendReply {
                    content: "ok".into(),
                    usage: None,
                })
            }
        }
    }

    fn gateway(max_retries: u32, fail_first: u32, error: AttemptError) -> (LlmGateway, Arc<Flaky>) {
        let backend = Arc::new(Flaky {
            calls: AtomicU32::new(0),
            fail_first,
            error,
        });
        let config = BackendConfig {
            max_retries,
            retry_backoff_ms: vec![0],
            ..BackendConfig::scripted("unused")
        };
        (LlmGateway::with_backend(config, backend.clone()), backend)
    }

    #[tokio::test]
    async fn transient_failures_are_retried() {
        let (gw, _) = gateway(3, 2, AttemptError::Transient("503".into()));
        let ex = gw.complete(&[ChatMessage::user("hi")]).await.unwrap();
        assert_eq!(ex.attempt_count, 3);
        assert_eq!(ex.failed_attempts.len(), 2);
    }

    #[tokio::test]
    async fn retries_are_bounded() {
        let (gw, backend) = gateway(2, 10, AttemptError::Transient("timeout".into()));
        let err = gw.complete(&[ChatMessage::user("hi")]).await.unwrap_err();
        assert_eq!(
            err,
            GatewayError::RetriesExhausted {
                attempts: 3,
                last: "timeout".into()
            }
        );
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
    }

    #[tokio::test]
    async fn fatal_errors_are_not_retried() {
        let (gw, backend) = gateway(5, 10, AttemptError::Fatal("400 bad request".into()));
        let err = gw.complete(&[ChatMessage::user("hi")]).await.unwrap_err();
        assert!(matches!(err, GatewayError::Fatal { attempts: 1, .. }));
        assert_eq!(backend.calls.load(Ordering::SeqCst), 1);
    }

    #[tokio::test]
    async fn empty_messages_rejected() {
        let (gw, _) = gateway(0, 0, AttemptError::Fatal(String::new()));
        assert_eq!(gw.complete(&[]).await.unwrap_err(), GatewayError::EmptyMessages);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let config = BackendConfig {
            flavor: Flavor::OpenaiCompatible,
            ..BackendConfig::default()
        };
        assert!(matches!(
            LlmGateway::from_config(config),
            Err(GatewayError::InvalidConfig(_))
        ));
    }
}
