//! Wire-level checks of the HTTP backends against a local capture server.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use valuescope_core::llm::GatewayError;
use valuescope_core::{BackendConfig, ChatMessage, Flavor, LlmGateway};

#[derive(Clone, Default)]
struct Capture {
    bodies: Arc<Mutex<Vec<Value>>>,
    auth: Arc<Mutex<Vec<Option<String>>>>,
    calls: Arc<AtomicUsize>,
    /// Status codes returned for the first calls, in order; afterwards 200.
    failures: Arc<Vec<u16>>,
    /// Raw body for 200 responses; `None` means a well-formed envelope.
    raw_ok: Option<&'static str>,
}

async fn respond(capture: &Capture, headers: axum::http::HeaderMap, body: Value, ok: Value) -> Response {
    let n = capture.calls.fetch_add(1, Ordering::SeqCst);
    capture.bodies.lock().unwrap().push(body);
    capture.auth.lock().unwrap().push(
        headers
            .get("authorization")
            .map(|v| v.to_str().unwrap().to_string()),
    );
    if let Some(code) = capture.failures.get(n) {
        return (StatusCode::from_u16(*code).unwrap(), "injected failure").into_response();
    }
    match capture.raw_ok {
        Some(raw) => (StatusCode::OK, raw).into_response(),
        None => Json(ok).into_response(),
    }
}

async fn openai(State(c): State<Capture>, headers: axum::http::HeaderMap, Json(body): Json<Value>) -> Response {
    let ok = json!({
        "choices": [{"index": 0, "message": {"role": "assistant", "content": "{\"values\": []}"}}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 4}
    });
    respond(&c, headers, body, ok).await
}

async fn ollama(State(c): State<Capture>, headers: axum::http::HeaderMap, Json(body): Json<Value>) -> Response {
    let ok = json!({
        "message": {"role": "assistant", "content": "ollama says hi"},
        "done": true,
        "prompt_eval_count": 9,
        "eval_count": 3
    });
    respond(&c, headers, body, ok).await
}

async fn start(capture: Capture) -> String {
    let app = Router::new()
        .route("/v1/chat/completions", post(openai))
        .route("/api/chat", post(ollama))
        .route(
            "/slow/api/chat",
            post(|| async {
                tokio::time::sleep(std::time::Duration::from_secs(5)).await;
                "too late"
            }),
        )
        .with_state(capture);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

fn config(flavor: Flavor, base_url: String) -> BackendConfig {
    BackendConfig {
        flavor,
        base_url,
        model_name: "test-model".into(),
        retry_backoff_ms: vec![1],
        api_key_env: "VALUESCOPE_TEST_KEY_UNSET".into(),
        ..BackendConfig::default()
    }
}

fn messages() -> Vec<ChatMessage> {
    vec![ChatMessage::system("be terse"), ChatMessage::user("hello")]
}

#[tokio::test]
async fn openai_payload_carries_temperature_and_seed() {
    let capture = Capture::default();
    let base = start(capture.clone()).await;
    let gw = LlmGateway::from_config(config(Flavor::OpenaiCompatible, format!("{base}/v1"))).unwrap();
    let exchange = gw.complete(&messages()).await.unwrap();

    assert_eq!(exchange.response_content, "{\"values\": []}");
    assert_eq!(exchange.attempt_count, 1);
    let usage = exchange.token_usage.unwrap();
    assert_eq!((usage.prompt, usage.completion), (11, 4));

    let body = capture.bodies.lock().unwrap()[0].clone();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["seed"], 42);
    assert_eq!(body["messages"][0], json!({"role": "system", "content": "be terse"}));
    assert_eq!(body["messages"][1], json!({"role": "user", "content": "hello"}));
    assert_eq!(capture.auth.lock().unwrap()[0], None);
}

#[tokio::test]
async fn ollama_payload_uses_options() {
    let capture = Capture::default();
    let base = start(capture.clone()).await;
    let mut cfg = config(Flavor::OllamaNative, base);
    cfg.temperature = 0.7;
    cfg.seed = 123;
    let exchange = LlmGateway::from_config(cfg).unwrap().complete(&messages()).await.unwrap();
    assert_eq!(exchange.response_content, "ollama says hi");

    let body = capture.bodies.lock().unwrap()[0].clone();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["stream"], false);
    assert_eq!(body["options"]["temperature"], 0.7);
    assert_eq!(body["options"]["seed"], 123);
    assert!(body.get("temperature").is_none());
}

#[tokio::test]
async fn transient_failures_are_retried() {
    let capture = Capture {
        failures: Arc::new(vec![503, 500]),
        ..Capture::default()
    };
    let base = start(capture.clone()).await;
    let gw = LlmGateway::from_config(config(Flavor::OpenaiCompatible, format!("{base}/v1"))).unwrap();
    let exchange = gw.complete(&messages()).await.unwrap();
    assert_eq!(exchange.attempt_count, 3);
    assert_eq!(exchange.failed_attempts.len(), 2);
    assert_eq!(capture.calls.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn retries_are_bounded() {
    let capture = Capture {
        failures: Arc::new(vec![502; 10]),
        ..Capture::default()
    };
    let base = start(capture.clone()).await;
    let mut cfg = config(Flavor::OllamaNative, base);
    cfg.max_retries = 1;
    let err = LlmGateway::from_config(cfg).unwrap().complete(&messages()).await.unwrap_err();
    assert!(matches!(err, GatewayError::RetriesExhausted { attempts: 2, .. }), "{err}");
    assert_eq!(capture.calls.load(Ordering::SeqCst), 2);
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let capture = Capture {
        failures: Arc::new(vec![400, 400, 400]),
        ..Capture::default()
    };
    let base = start(capture.clone()).await;
    let gw = LlmGateway::from_config(config(Flavor::OpenaiCompatible, format!("{base}/v1"))).unwrap();
    let err = gw.complete(&messages()).await.unwrap_err();
    assert!(matches!(err, GatewayError::Fatal { attempts: 1, .. }), "{err}");
    assert_eq!(capture.calls.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn malformed_envelope_is_fatal() {
    let capture = Capture {
        raw_ok: Some("{\"choices\": []}"),
        ..Capture::default()
    };
    let base = start(capture.clone()).await;
    let gw = LlmGateway::from_config(config(Flavor::OpenaiCompatible, format!("{base}/v1"))).unwrap();
    let err = gw.complete(&messages()).await.unwrap_err();
    assert!(err.to_string().contains("malformed"), "{err}");
    assert_eq!(capture.calls.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn connection_refused_is_transient() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let mut cfg = config(Flavor::OllamaNative, format!("http://{addr}"));
    cfg.max_retries = 2;
    let err = LlmGateway::from_config(cfg).unwrap().complete(&messages()).await.unwrap_err();
    assert!(matches!(err, GatewayError::RetriesExhausted { attempts: 3, .. }), "{err}");
}

#[tokio::test]
async fn timeouts_are_transient() {
    let base = start(Capture::default()).await;
    let mut cfg = config(Flavor::OllamaNative, format!("{base}/slow"));
    cfg.timeout_ms = 100;
    cfg.max_retries = 1;
    let started = std::time::Instant::now();
    let err = LlmGateway::from_config(cfg).unwrap().complete(&messages()).await.unwrap_err();
    assert!(matches!(err, GatewayError::RetriesExhausted { attempts: 2, .. }), "{err}");
    assert!(started.elapsed() < std::time::Duration::from_secs(3));
}
