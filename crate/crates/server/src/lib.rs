//! HTTP inference service: upload a screenshot plus its view hierarchy and
//! get back per-element tappability probabilities and mismatch flags.
//!
//! The predictor is installed once into a [`ServerState`]; until then
//! `/health` answers 503 and `/analyze` refuses work. Request handling never
//! mutates the state.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::QueryRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Query, State};
use axum::http::{Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tapkit_core::dataset::parse_hierarchy;
use tapkit_core::features::FeatureError;
use tapkit_core::model::{ElementPrediction, ModelError};
use tapkit_core::{EmbeddingTable, ModelCheckpoint, Predictor, ScreenRecord};
use thiserror::Error;
use tower_http::cors::{Any, CorsLayer};

/// Largest accepted request body.
pub const MAX_UPLOAD_BYTES: usize = 20 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("loading checkpoint: {0}")]
    Model(#[from] ModelError),
    #[error("loading embeddings: {0}")]
    Feature(#[from] FeatureError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("model loader task failed: {0}")]
    Loader(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResponse {
    pub elements: Vec<ElementPrediction>,
    pub model_version: String,
    pub threshold_used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_version: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

/// Shared, write-once slot for the predictor.
#[derive(Debug, Clone, Default)]
pub struct ServerState {
    predictor: Arc<OnceLock<Predictor>>,
}

impl ServerState {
    pub fn loading() -> Self {
        Self::default()
    }

    pub fn ready(predictor: Predictor) -> Self {
        let state = Self::default();
        state.install(predictor);
        state
    }

    /// Installs the predictor. Later calls are ignored: the model is
    /// immutable once serving.
    pub fn install(&self, predictor: Predictor) -> bool {
        self.predictor.set(predictor).is_ok()
    }

    pub fn predictor(&self) -> Option<&Predictor> {
        self.predictor.get()
    }
}

pub fn load_predictor(checkpoint: &std::path::Path, embeddings: &std::path::Path) -> Result<Predictor, ServerError> {
    let checkpoint = ModelCheckpoint::load(checkpoint)?;
    let embeddings = Arc::new(EmbeddingTable::load(embeddings)?);
    Ok(Predictor::new(checkpoint, embeddings)?)
}

pub fn router(state: ServerState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any);
    Router::new()
        .route("/health", get(health))
        .route("/analyze", post(analyze))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .layer(cors)
        .with_state(state)
}

/// Binds `addr`, loads the model in the background and serves until the
/// process is stopped. `/health` reports 503 while loading.
pub async fn serve(addr: SocketAddr, checkpoint: PathBuf, embeddings: PathBuf) -> Result<(), ServerError> {
    let state = ServerState::loading();
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    let loader_state = state.clone();
    let loader = tokio::task::spawn_blocking(move || -> Result<(), ServerError> {
        let predictor = load_predictor(&checkpoint, &embeddings)?;
        log::info!(
            "model {} loaded (threshold {:.4})",
            predictor.model_version(),
            predictor.threshold()
        );
        loader_state.install(predictor);
        Ok(())
    });
    let server = std::future::IntoFuture::into_future(axum::serve(listener, router(state)));
    tokio::pin!(server);
    tokio::select! {
        r = &mut server => r?,
        r = loader => {
            // A model that fails to load is fatal; otherwise keep serving.
            r.map_err(|e| ServerError::Loader(e.to_string()))??;
            server.await?;
        }
    }
    Ok(())
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    reason: String,
}

impl ApiError {
    fn new(status: StatusCode, reason: impl Into<String>) -> Self {
        Self {
            status,
            reason: reason.into(),
        }
    }

    fn bad_request(reason: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, reason)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.reason }))).into_response()
    }
}

async fn health(State(state): State<ServerState>) -> Response {
    match state.predictor() {
        Some(p) => Json(HealthResponse {
            status: "ok".into(),
            model_version: Some(p.model_version().to_string()),
            threshold: Some(p.threshold()),
        })
        .into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(HealthResponse {
                status: "loading".into(),
                model_version: None,
                threshold: None,
            }),
        )
            .into_response(),
    }
}

fn parse_threshold(query: &HashMap<String, String>) -> Result<Option<f64>, ApiError> {
    let Some(raw) = query.get("threshold") else {
        return Ok(None);
    };
    let t: f64 = raw
        .trim()
        .parse()
        .map_err(|_| ApiError::bad_request(format!("threshold `{raw}` is not a number")))?;
    if !(t > 0.0 && t < 1.0) {
        return Err(ApiError::bad_request(format!("threshold {t} is outside (0, 1)")));
    }
    Ok(Some(t))
}

struct Upload {
    screenshot: Vec<u8>,
    hierarchy: Vec<u8>,
}

async fn read_upload(mut multipart: Multipart) -> Result<Upload, ApiError> {
    let (mut screenshot, mut hierarchy) = (None, None);
    loop {
        let field = match multipart.next_field().await {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) => return Err(ApiError::new(e.status(), e.body_text())),
        };
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
        match name.as_str() {
            "screenshot" => screenshot = Some(bytes.to_vec()),
            "hierarchy" => hierarchy = Some(bytes.to_vec()),
            other => log::debug!("ignoring multipart field `{other}`"),
        }
    }
    Ok(Upload {
        screenshot: screenshot.ok_or_else(|| ApiError::bad_request("missing multipart field `screenshot`"))?,
        hierarchy: hierarchy.ok_or_else(|| ApiError::bad_request("missing multipart field `hierarchy`"))?,
    })
}

/// `null`, `{}` and a document whose root is `null` count as an empty
/// hierarchy: nothing to analyze.
fn is_empty_hierarchy(doc: &Value) -> bool {
    match doc {
        Value::Null => true,
        Value::Object(m) if m.is_empty() => true,
        Value::Object(m) => matches!(
            m.get("activity").map(|a| a.get("root")),
            Some(None) | Some(Some(Value::Null))
        ),
        _ => false,
    }
}

fn analyze_upload(predictor: &Predictor, upload: Upload, threshold: Option<f64>) -> Result<AnalysisResponse, ApiError> {
    let image = image::load_from_memory(&upload.screenshot)
        .map_err(|e| ApiError::bad_request(format!("screenshot is not a readable image: {e}")))?
        .to_rgb8();
    let (w, h) = image.dimensions();
    if w > h {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("screenshot is landscape ({w}x{h}); only portrait screens are supported"),
        ));
    }
    let text = std::str::from_utf8(&upload.hierarchy)
        .map_err(|_| ApiError::bad_request("hierarchy is not UTF-8 text"))?;
    let doc: Value =
        serde_json::from_str(text).map_err(|e| ApiError::bad_request(format!("hierarchy is not valid JSON: {e}")))?;
    let threshold_used = threshold.unwrap_or(predictor.threshold());
    let response = |elements| AnalysisResponse {
        elements,
        model_version: predictor.model_version().to_string(),
        threshold_used,
    };
    if is_empty_hierarchy(&doc) {
        return Ok(response(Vec::new()));
    }
    let parsed = parse_hierarchy(text).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let screen = ScreenRecord::new("upload", image, parsed.root).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let elements = predictor.analyze(&screen, Some(threshold_used)).map_err(|e| match e {
        ModelError::Feature(FeatureError::Landscape { .. }) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        ModelError::Feature(_) | ModelError::Dataset(_) => ApiError::bad_request(e.to_string()),
        other => {
            log::error!("analysis failed: {other}");
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string())
        }
    })?;
    Ok(response(elements))
}

async fn analyze(
    State(state): State<ServerState>,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
    multipart: Result<Multipart, MultipartRejection>,
) -> Result<Json<AnalysisResponse>, ApiError> {
    if state.predictor().is_none() {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "model is still loading"));
    }
    let Query(query) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let threshold = parse_threshold(&query)?;
    let multipart = multipart.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
    let upload = read_upload(multipart).await?;
    let response = tokio::task::spawn_blocking(move || {
        let predictor = state.predictor().expect("checked above");
        analyze_upload(predictor, upload, threshold)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(response))
}
