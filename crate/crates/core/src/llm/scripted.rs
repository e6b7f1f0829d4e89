//! Deterministic stand-in for an inference server.
//!
//! A script is an ordered list of entries, each pairing a substring of the
//! user prompt with a canned reply (or an injected failure). The first entry
//! whose matcher occurs in the prompt wins; otherwise the default reply is
//! used, and without a default the call fails.
//!
//! Script files are JSON:
//!
//! ```json
//! {
//!   "entries": [
//!     { "matcher": "corporate ladder", "response": { "values": [] } },
//!     { "matcher": "broken sample", "error": "simulated outage" }
//!   ],
//!   "default": "{\"values\": []}"
//! }
//! ```
//!
//! A `response` that is a JSON string is returned verbatim; any other JSON
//! value is returned in its compact serialised form.

use std::path::Path;

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use super::{AttemptError, BackendReply, ChatBackend, ChatRequest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptOutcome {
    Reply(String),
    Fail(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptEntry {
    pub matcher: String,
    pub outcome: ScriptOutcome,
}

impl ScriptEntry {
    pub fn reply(matcher: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: matcher.into(),
            outcome: ScriptOutcome::Reply(response.into()),
        }
    }

    pub fn fail(matcher: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            matcher: matcher.into(),
            outcome: ScriptOutcome::Fail(message.into()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read script {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid script {path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    entries: Vec<EntryFile>,
    #[serde(default)]
    default: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryFile {
    matcher: String,
    #[serde(default)]
    response: Option<Value>,
    #[serde(default)]
    error: Option<String>,
}

fn response_text(value: Value) -> String {
    match value {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

/// Immutable after construction.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    default: Option<String>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>, default: Option<String>) -> Self {
        Self { entries, default }
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|message| ScriptError::Invalid {
            path: path.display().to_string(),
            message,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let file: ScriptFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut entries = Vec::with_capacity(file.entries.len());
        for (i, e) in file.entries.into_iter().enumerate() {
            if e.matcher.is_empty() {
                return Err(format!("entries[{i}]: empty matcher"));
            }
            let outcome = match (e.response, e.error) {
                (Some(r), None) => ScriptOutcome::Reply(response_text(r)),
                (None, Some(msg)) => ScriptOutcome::Fail(msg),
                _ => return Err(format!("entries[{i}]: exactly one of response or error is required")),
            };
            entries.push(ScriptEntry {
                matcher: e.matcher,
                outcome,
            });
        }
        Ok(Self {
            entries,
            default: file.default.map(response_text),
        })
    }

    /// The outcome for `user_prompt`, or `None` when nothing matches.
    pub fn lookup(&self, user_prompt: &str) -> Option<ScriptOutcome> {
        self.entries
            .iter()
            .find(|e| user_prompt.contains(&e.matcher))
            .map(|e| e.outcome.clone())
            .or_else(|| self.default.clone().map(ScriptOutcome::Reply))
    }
}

#[async_trait]
impl ChatBackend for ScriptedBackend {
    async fn send(&self, request: &ChatRequest<'_>) -> Result<BackendReply, AttemptError> {
        let prompt = request.user_prompt();
        match self.lookup(&prompt) {
            Some(ScriptOutcome::Reply(content)) => Ok(BackendReply {
                content,
                usage: None,
            }),
            Some(ScriptOutcome::Fail(message)) => Err(AttemptError::Fatal(message)),
            None => {
                let excerpt: String = prompt.chars().take(80).collect();
                Err(AttemptError::Fatal(format!(
                    "no scripted response matches prompt starting {excerpt:?}"
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{BackendConfig, ChatMessage, LlmGateway};
    use std::sync::Arc;

    fn gateway(backend: ScriptedBackend) -> LlmGateway {
        LlmGateway::with_backend(BackendConfig::scripted("unused"), Arc::new(backend))
    }

    #[tokio::test]
    async fn first_match_wins() {
        let backend = ScriptedBackend::new(
            vec![
                ScriptEntry::reply("Climbing the corporate ladder", "first"),
                ScriptEntry::reply("corporate", "second"),
            ],
            None,
        );
        let ex = gateway(backend)
            .complete(&[
                ChatMessage::system("ignored Climbing the corporate ladder? no"),
                ChatMessage::user("Text: Climbing the corporate ladder used to be my goal"),
            ])
            .await
            .unwrap();
        assert_eq!(ex.response_content, "first");
        assert_eq!(ex.attempt_count, 1);
    }

    #[tokio::test]
    async fn system_prompt_is_not_matched() {
        let backend = ScriptedBackend::new(vec![ScriptEntry::reply("secret", "x")], None);
        let err = gateway(backend)
            .complete(&[ChatMessage::system("secret"), ChatMessage::user("hello")])
            .await
            .unwrap_err();
        assert!(err.to_string().contains("no scripted response"));
    }

    #[tokio::test]
    async fn default_and_failure_entries() {
        let backend = ScriptedBackend::from_json(
            r#"{"entries":[{"matcher":"boom","error":"simulated outage"}],"default":{"values":[]}}"#,
        )
        .unwrap();
        let gw = gateway(backend);
        let ex = gw.complete(&[ChatMessage::user("anything")]).await.unwrap();
        assert_eq!(ex.response_content, r#"{"values":[]}"#);
        let err = gw.complete(&[ChatMessage::user("boom")]).await.unwrap_err();
        assert!(err.to_string().contains("simulated outage"));
    }

    #[tokio::test]
    async fn identical_inputs_identical_exchanges() {
        let backend = ScriptedBackend::new(vec![ScriptEntry::reply("a", "reply")], None);
        let gw = gateway(backend);
        let msgs = [ChatMessage::system("s"), ChatMessage::user("a b")];
        let mut first = gw.complete(&msgs).await.unwrap();
        let mut second = gw.complete(&msgs).await.unwrap();
        first.latency_ms = 0;
        second.latency_ms = 0;
        assert_eq!(first, second);
    }

    #[test]
    fn rejects_ambiguous_entries() {
        assert!(ScriptedBackend::from_json(r#"{"entries":[{"matcher":"a"}]}"#).is_err());
        assert!(ScriptedBackend::from_json(
            r#"{"entries":[{"matcher":"a","response":"x","error":"y"}]}"#
        )
        .is_err());
        assert!(ScriptedBackend::from_json(r#"{"entries":[{"matcher":"","response":"x"}]}"#).is_err());
    }
}
