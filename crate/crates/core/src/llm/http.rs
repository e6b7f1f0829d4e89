//! Wire clients for OpenAI-compatible and Ollama-native chat endpoints.

use async_trait::async_trait;
use reqwest::Client;
use serde::{Deserialize, Serialize};

use super::{AttemptError, BackendConfig, BackendReply, ChatBackend, ChatMessage, ChatRequest, TokenUsage};

const BODY_EXCERPT: usize = 512;

fn build_client(config: &BackendConfig) -> Result<Client, String> {
    Client::builder()
        .timeout(config.timeout())
        .build()
        .map_err(|e| format!("cannot build HTTP client: {e}"))
}

fn endpoint(base_url: &str, suffix: &str) -> String {
    format!("{}/{}", base_url.trim_end_matches('/'), suffix)
}

fn classify_transport(err: reqwest::Error) -> AttemptError {
    if err.is_timeout() || err.is_connect() || err.is_request() || err.is_body() {
        AttemptError::Transient(err.to_string())
    } else {
        AttemptError::Fatal(err.to_string())
    }
}

async fn post_json<B: Serialize + ?Sized>(
    client: &Client,
    url: &str,
    bearer: Option<&str>,
    body: &B,
) -> Result<String, AttemptError> {
    let mut req = client.post(url).json(body);
    if let Some(token) = bearer {
        req = req.bearer_auth(token);
    }
    let resp = req.send().await.map_err(classify_transport)?;
    let status = resp.status();
    let text = resp.text().await.map_err(classify_transport)?;
    if status.is_success() {
        return Ok(text);
    }
    let excerpt: String = text.chars().take(BODY_EXCERPT).collect();
    let detail = format!("HTTP {status} from {url}: {excerpt}");
    if status.is_server_error() {
        Err(AttemptError::Transient(detail))
    } else {
        Err(AttemptError::Fatal(detail))
    }
}

fn malformed(url: &str, err: impl std::fmt::Display) -> AttemptError {
    AttemptError::Fatal(format!("malformed reply envelope from {url}: {err}"))
}

#[derive(Serialize)]
struct OpenAiRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    seed: i64,
    stream: bool,
}

#[derive(Deserialize)]
struct OpenAiResponse {
    choices: Vec<OpenAiChoice>,
    usage: Option<OpenAiUsage>,
}

#[derive(Deserialize)]
struct OpenAiChoice {
    message: OpenAiMessage,
}

#[derive(Deserialize)]
struct OpenAiMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct OpenAiUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

/// `POST {base_url}/chat/completions`; temperature and seed travel as the
/// top-level `temperature` and `seed` fields.
pub struct OpenAiBackend {
    client: Client,
    url: String,
    api_key: Option<String>,
}

impl OpenAiBackend {
    pub fn new(config: &BackendConfig) -> Result<Self, String> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(Self {
            client: build_client(config)?,
            url: endpoint(&config.base_url, "chat/completions"),
            api_key,
        })
    }
}

#[async_trait]
impl ChatBackend for OpenAiBackend {
    async fn send(&self, request: &ChatRequest<'_>) -> Result<BackendReply, AttemptError> {
        let body = OpenAiRequest {
            model: request.model,
            messages: request.messages,
            temperature: request.temperature,
            seed: request.seed,
            stream: false,
        };
        let text = post_json(&self.client, &self.url, self.api_key.as_deref(), &body).await?;
        let parsed: OpenAiResponse = serde_json::from_str(&text).map_err(|e| malformed(&self.url, e))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| malformed(&self.url, "no choices[0].message.content"))?;
        Ok(BackendReply {
            content,
            usage: parsed.usage.map(|u| TokenUsage {
                prompt: u.prompt_tokens,
                completion: u.completion_tokens,
            }),
        })
    }
}

#[derive(Serialize)]
struct OllamaRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    stream: bool,
    options: OllamaOptions,
}

#[derive(Serialize)]
struct OllamaOptions {
    temperature: f64,
    seed: i64,
}

#[derive(Deserialize)]
struct OllamaResponse {
    message: OllamaMessage,
    prompt_eval_count: Option<u64>,
    eval_count: Option<u64>,
}

#[derive(Deserialize)]
struct OllamaMessage {
    content: String,
}

/// `POST {base_url}/api/chat`; temperature and seed travel in `options`.
pub struct OllamaBackend {
    client: Client,
    url: String,
}

impl OllamaBackend {
    pub fn new(config: &BackendConfig) -> Result<Self, String> {
        Ok(Self {
            client: build_client(config)?,
            url: endpoint(&config.base_url, "api/chat"),
        })
    }
}

#[async_trait]
impl ChatBackend for OllamaBackend {
    async fn send(&self, request: &ChatRequest<'_>) -> Result<BackendReply, AttemptError> {
        let body = OllamaRequest {
            model: request.model,
            messages: request.messages,
            stream: false,
            options: OllamaOptions {
                temperature: request.temperature,
                seed: request.seed,
            },
        };
        let text = post_json(&self.client, &self.url, None, &body).await?;
        let parsed: OllamaResponse = serde_json::from_str(&text).map_err(|e| malformed(&self.url, e))?;
        let usage = match (parsed.prompt_eval_count, parsed.eval_count) {
            (Some(prompt), Some(completion)) => Some(TokenUsage { prompt, completion }),
            _ => None,
        };
        Ok(BackendReply {
            content: parsed.message.content,
            usage,
        })
    }
}
