#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use tokio::sync::{Notify, Semaphore};
use valuescope_core::llm::{AttemptError, BackendReply, ChatBackend, ChatRequest};
use valuescope_core::{BackendConfig, LlmGateway, ScriptedBackend};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn script(name: &str) -> PathBuf {
    fixtures().join("scripts").join(name)
}

pub fn scripted_gateway(script_name: &str) -> LlmGateway {
    LlmGateway::from_config(BackendConfig::scripted(script(script_name))).unwrap()
}

/// Records every user prompt before delegating.
pub struct Capturing {
    pub inner: Arc<dyn ChatBackend>,
    pub prompts: Arc<Mutex<Vec<String>>>,
}

#[async_trait]
impl ChatBackend for Capturing {
    async fn send(&self, request: &ChatRequest<'_>) -> Result<BackendReply, AttemptError> {
        self.prompts.lock().unwrap().push(request.user_prompt());
        self.inner.send(request).await
    }
}

pub fn capturing_gateway(script_name: &str) -> (LlmGateway, Arc<Mutex<Vec<String>>>) {
    let config = BackendConfig::scripted(script(script_name));
    let prompts = Arc::new(Mutex::new(Vec::new()));
    let backend = Capturing {
        inner: Arc::new(ScriptedBackend::load(&script(script_name)).unwrap()),
        prompts: Arc::clone(&prompts),
    };
    (LlmGateway::with_backend(config, Arc::new(backend)), prompts)
}

/// Holds every call until a permit is released; signals each arrival.
pub struct Gated {
    pub inner: Arc<dyn ChatBackend>,
    pub permits: Arc<Semaphore>,
    pub arrived: Arc<Notify>,
    pub prompts: Arc<Mutex<Vec<String>>>,
}

#[async_trait]
impl ChatBackend for Gated {
    async fn send(&self, request: &ChatRequest<'_>) -> Result<BackendReply, AttemptError> {
        self.prompts.lock().unwrap().push(request.user_prompt());
        self.arrived.notify_one();
        self.permits.acquire().await.unwrap().forget();
        self.inner.send(request).await
    }
}

pub fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), to.join(entry.file_name())).unwrap();
    }
}
