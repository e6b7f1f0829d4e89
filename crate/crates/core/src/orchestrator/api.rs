//! JSON over HTTP.
//!
//! | Method | Path | Success | Errors |
//! |---|---|---|---|
//! | GET | `/theories` | 200 list of summaries | |
//! | GET | `/theories/{id}` | 200 theory | 404 |
//! | PUT | `/theories/{id}` | 200 `{theory_id, version}` | 400, 404, 409, 422 with a validation report |
//! | POST | `/theories/{id}/refresh` | 200 refresh outcome | 404, 500, 502 |
//! | POST | `/analyses` | 202 `{job_id}` | 400, 404 |
//! | GET | `/analyses/{job_id}` | 200 job | 404 |
//!
//! Error bodies are `{"error": "..."}` except 422, which returns the
//! validation report itself.

use std::future::Future;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

use super::{AnalysisRequest, Orchestrator, RefreshError, ReviseError, SubmitError};
use crate::conceptualise::ConceptualiseError;
use crate::value_spec::Edit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviseRequest {
    /// Version the edits were made against; omitted means "whatever is current".
    #[serde(default)]
    pub base_version: Option<u64>,
    pub edits: Vec<Edit>,
}

fn error(status: StatusCode, message: impl ToString) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

fn bad_body(rejection: JsonRejection) -> Response {
    error(StatusCode::BAD_REQUEST, rejection.body_text())
}

pub fn router(orchestrator: Orchestrator) -> Router {
    Router::new()
        .route("/theories", get(list_theories))
        .route("/theories/{id}", get(get_theory).put(put_theory))
        .route("/theories/{id}/refresh", post(refresh_theory))
        .route("/analyses", post(submit_analysis))
        .route("/analyses/{job_id}", get(get_analysis))
        .layer(CorsLayer::permissive())
        .with_state(orchestrator)
}

async fn list_theories(State(o): State<Orchestrator>) -> Response {
    Json(o.store().list()).into_response()
}

async fn get_theory(State(o): State<Orchestrator>, Path(id): Path<String>) -> Response {
    match o.store().get(&id) {
        Some(theory) => Json(&*theory).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown theory {id:?}")),
    }
}

async fn put_theory(
    State(o): State<Orchestrator>,
    Path(id): Path<String>,
    body: Result<Json<ReviseRequest>, JsonRejection>,
) -> Response {
    let Json(request) = match body {
        Ok(b) => b,
        Err(r) => return bad_body(r),
    };
    match o.revise(&id, request.base_version, &request.edits).await {
        Ok(theory) => Json(json!({ "theory_id": theory.theory_id, "version": theory.version })).into_response(),
        Err(ReviseError::NotFound(_)) => error(StatusCode::NOT_FOUND, format!("unknown theory {id:?}")),
        Err(e @ ReviseError::Stale { current, .. }) => (
            StatusCode::CONFLICT,
            Json(json!({ "error": e.to_string(), "current_version": current })),
        )
            .into_response(),
        Err(ReviseError::Invalid(report)) => (StatusCode::UNPROCESSABLE_ENTITY, Json(report)).into_response(),
        Err(e @ ReviseError::Store(_)) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn refresh_theory(State(o): State<Orchestrator>, Path(id): Path<String>) -> Response {
    match o.refresh_specs(&id).await {
        Ok(outcome) => Json(outcome).into_response(),
        Err(e @ RefreshError::NoDocuments(_)) => error(StatusCode::NOT_FOUND, e),
        Err(
            e @ RefreshError::Conceptualise {
                source: ConceptualiseError::Gateway(_),
                ..
            },
        ) => error(StatusCode::BAD_GATEWAY, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn submit_analysis(
    State(o): State<Orchestrator>,
    body: Result<Json<AnalysisRequest>, JsonRejection>,
) -> Response {
    let Json(request) = match body {
        Ok(b) => b,
        Err(r) => return bad_body(r),
    };
    match o.submit(request) {
        Ok(job_id) => (StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))).into_response(),
        Err(e @ SubmitError::UnknownTheory(_)) => error(StatusCode::NOT_FOUND, e),
        Err(e @ SubmitError::EmptyText) => error(StatusCode::BAD_REQUEST, e),
    }
}

async fn get_analysis(State(o): State<Orchestrator>, Path(job_id): Path<String>) -> Response {
    match o.job(&job_id) {
        Some(job) => Json(job).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown job {job_id:?}")),
    }
}

/// Serves the API until `shutdown` resolves, then waits for in-flight jobs.
pub async fn serve(
    orchestrator: Orchestrator,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(orchestrator.clone());
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    orchestrator.drain().await;
    Ok(())
}
