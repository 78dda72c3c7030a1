//! HTTP front end for [`AnnotationService`].
//!
//! | Method | Path | Body |
//! |---|---|---|
//! | GET | `/api/pairs?status=&page=` | |
//! | GET | `/api/pairs/{id}` | |
//! | GET | `/api/pairs/{id}/image/{pre\|post\|mask}` | |
//! | POST | `/api/pairs/{id}/captions` | `{"captions": [..], "annotator": ".."}` |
//! | POST | `/api/pairs/{id}/verify` | `{"verdict": "approve"\|"reject", "verifier": ".."}` |
//! | GET | `/api/progress` | |
//!
//! Both POST routes answer with the pair's updated payload, the same
//! object `GET /api/pairs/{id}` returns.
//!
//! Errors are `{"error": message}` with status 400 (bad input), 404
//! (unknown pair) or 409 (illegal status transition).

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use changekit_core::annotation::{AnnotationService, ImageKind, StatusFilter, Verdict};
use changekit_core::Error;
use serde::de::DeserializeOwned;
use serde::Deserialize;

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::InvalidInput(_) | Error::Shape(_) | Error::Json { .. } => StatusCode::BAD_REQUEST,
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Conflict(_) => StatusCode::CONFLICT,
            Error::Io { .. } | Error::Image { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        (status, Json(serde_json::json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Shared = Arc<AnnotationService>;

#[derive(Debug, Deserialize)]
struct CaptionsBody {
    captions: Vec<String>,
    annotator: String,
}

#[derive(Debug, Deserialize)]
struct VerifyBody {
    verdict: Verdict,
    verifier: String,
}

fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|source| {
        ApiError(Error::Json {
            context: "request body".into(),
            source,
        })
    })
}

/// Runs blocking service work (disk reads, synced appends) off the async
/// executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> changekit_core::Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .expect("annotation task panicked")
        .map_err(ApiError)
}

async fn list_pairs(State(svc): State<Shared>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Response> {
    let filter: StatusFilter = q.get("status").map_or(Ok(StatusFilter::All), |s| s.parse())?;
    let page = match q.get("page").map(String::as_str) {
        None | Some("") => 1,
        Some(p) => p
            .parse::<usize>()
            .map_err(|_| Error::InvalidInput(format!("page must be a positive integer, got {p:?}")))?,
    };
    Ok(Json(svc.list_pairs(filter, page)?).into_response())
}

async fn pair(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(svc.pair_payload(&id)?).into_response())
}

async fn image(State(svc): State<Shared>, Path((id, kind)): Path<(String, String)>) -> ApiResult<Response> {
    let kind: ImageKind = kind.parse()?;
    let png = blocking(move || svc.image_png(&id, kind)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn submit_captions(State(svc): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let body: CaptionsBody = parse_body(&body)?;
    let payload = blocking(move || {
        svc.submit_captions(&id, &body.captions, &body.annotator)?;
        svc.pair_payload(&id)
    })
    .await?;
    Ok(Json(payload).into_response())
}

async fn verify(State(svc): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let body: VerifyBody = parse_body(&body)?;
    let payload = blocking(move || {
        svc.verify(&id, body.verdict, &body.verifier)?;
        svc.pair_payload(&id)
    })
    .await?;
    Ok(Json(payload).into_response())
}

async fn progress(State(svc): State<Shared>) -> Response {
    Json(svc.progress()).into_response()
}

async fn fallback() -> ApiError {
    ApiError(Error::NotFound("no such endpoint".into()))
}

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/api/pairs", get(list_pairs))
        .route("/api/pairs/{id}", get(pair))
        .route("/api/pairs/{id}/image/{kind}", get(image))
        .route("/api/pairs/{id}/captions", post(submit_captions))
        .route("/api/pairs/{id}/verify", post(verify))
        .route("/api/progress", get(progress))
        .fallback(fallback)
        .with_state(service)
}

/// Binds `addr` and serves until `shutdown` resolves.
pub async fn serve(
    addr: SocketAddr,
    service: Shared,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotation server listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}
