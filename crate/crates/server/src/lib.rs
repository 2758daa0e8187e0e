//! JSON-over-HTTP front end for [`AnnotationService`].
//!
//! Every handler hands the (synchronous, fsync-ing) service call to the
//! blocking pool so slow disks never stall the async workers.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use sponsorscope_core::agreement::SponsoredRate;
use sponsorscope_core::service::{
    AnnotationService, ExportFilter, Expertise, ServiceError, Setup, SurveyAnswers,
};
use sponsorscope_core::Label;

pub type Shared = Arc<AnnotationService>;

/// Error body: `{"error": "...", "kind": "not_found"}`.
#[derive(Debug)]
pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        Self(e)
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
    kind: &'static str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            ServiceError::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            ServiceError::Agreement(_) => (StatusCode::UNPROCESSABLE_ENTITY, "agreement"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let body = ErrorBody {
            error: self.0.to_string(),
            kind,
        };
        (status, Json(body)).into_response()
    }
}

async fn blocking<T, F>(service: Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&AnnotationService) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ApiError(ServiceError::Io(std::io::Error::other(e))))?
        .map_err(ApiError)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateProject {
    pub annotator_id: String,
    pub batch_id: String,
    pub setup: Setup,
    #[serde(default)]
    pub seed: u64,
    /// Registers the annotator first when they are not known yet.
    #[serde(default)]
    pub expertise: Option<Expertise>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitLabel {
    pub post_id: String,
    pub label: Label,
}

#[derive(Debug, Default, Deserialize)]
struct ExportQuery {
    setup: Option<Setup>,
    expertise: Option<Expertise>,
    /// `csv` returns the bare label file; anything else returns JSON.
    format: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    batch: String,
    #[serde(default)]
    rate: SponsoredRate,
}

async fn create_project(State(s): State<Shared>, Json(req): Json<CreateProject>) -> Result<Response, ApiError> {
    let project = blocking(s, move |s| {
        if let Some(expertise) = req.expertise {
            if !s.annotators().iter().any(|a| a.annotator_id == req.annotator_id) {
                s.register_annotator(&req.annotator_id, expertise)?;
            }
        }
        s.create_project(&req.annotator_id, &req.batch_id, req.setup, req.seed)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(project)).into_response())
}

async fn next_item(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let next = blocking(s, move |s| s.next_item(&id)).await?;
    Ok(Json(next).into_response())
}

async fn submit_label(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<SubmitLabel>,
) -> Result<Response, ApiError> {
    let ack = blocking(s, move |s| s.submit_label(&id, &req.post_id, req.label)).await?;
    Ok(Json(ack).into_response())
}

async fn attention(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let report = blocking(s, move |s| s.attention_report(&id)).await?;
    Ok(Json(report).into_response())
}

async fn survey(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Json(answers): Json<SurveyAnswers>,
) -> Result<Response, ApiError> {
    let stored = blocking(s, move |s| s.submit_survey(&id, answers)).await?;
    Ok((StatusCode::CREATED, Json(stored)).into_response())
}

async fn export(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let filter = ExportFilter {
        setup: q.setup,
        expertise: q.expertise,
    };
    let export = blocking(s, move |s| s.export_labels(&id, filter)).await?;
    if q.format.as_deref() == Some("csv") {
        return Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], export.to_csv()).into_response());
    }
    Ok(Json(export).into_response())
}

async fn agreement(State(s): State<Shared>, Query(q): Query<ReportQuery>) -> Result<Response, ApiError> {
    let report = blocking(s, move |s| s.agreement_report(&q.batch, q.rate)).await?;
    Ok(Json(report).into_response())
}

async fn health() -> &'static str {
    "ok"
}

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/projects", post(create_project))
        .route("/projects/{id}/next", get(next_item))
        .route("/projects/{id}/labels", post(submit_label))
        .route("/projects/{id}/attention", get(attention))
        .route("/projects/{id}/survey", post(survey))
        .route("/batches/{id}/export", get(export))
        .route("/reports/agreement", get(agreement))
        .with_state(service)
}

/// Binds `addr` and serves until the process receives Ctrl-C.
pub async fn serve(service: Shared, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
