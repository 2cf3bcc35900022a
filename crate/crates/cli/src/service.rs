//! HTTP completion service.
//!
//! The loaded artifacts live in an immutable [`Snapshot`] behind an
//! `RwLock<Arc<_>>`; requests clone the `Arc` and never block a reload, and
//! a failed reload leaves the previous snapshot serving.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::extract::{Query, State};
use axum::http::{Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{Datelike, Utc};
use serde::{Deserialize, Serialize};
use sqac_core::index::{load_index, CompletionIndex, Order};
use sqac_core::ranker::{l2_rerank, L2Config, ProfileScorer};
use sqac_core::seasonnet::{load_model, SeasonModel};
use sqac_core::{normalize_prefix, normalize_query, Month};
use tower_http::cors::{Any, CorsLayer};

pub struct Snapshot {
    pub index: CompletionIndex,
    pub scorer: ProfileScorer,
    pub model_fingerprint: String,
    pub index_fingerprint: String,
    pub loaded_at: chrono::DateTime<Utc>,
}

impl Snapshot {
    pub fn new(index: CompletionIndex, model: SeasonModel) -> Self {
        let model_fingerprint = model.fingerprint();
        let index_fingerprint = index.fingerprint();
        let scorer = ProfileScorer::new(model, index.entries().iter().map(|e| e.query.as_str()));
        Self {
            index,
            scorer,
            model_fingerprint,
            index_fingerprint,
            loaded_at: Utc::now(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArtifactPaths {
    pub model: PathBuf,
    pub index: PathBuf,
}

impl ArtifactPaths {
    pub fn load(&self) -> sqac_core::Result<Snapshot> {
        let model = load_model(&self.model)?;
        let index = load_index(&self.index)?;
        Ok(Snapshot::new(index, model))
    }
}

pub struct AppState {
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    paths: Option<ArtifactPaths>,
    defaults: L2Config,
    month: Option<Month>,
}

impl AppState {
    /// Loads both artifacts; fails if either is missing or damaged.
    pub fn load(paths: ArtifactPaths, defaults: L2Config) -> sqac_core::Result<Self> {
        let state = Self::unloaded(paths, defaults)?;
        state.reload()?;
        Ok(state)
    }

    /// A state that answers 503 until a successful `/reload`.
    pub fn unloaded(paths: ArtifactPaths, defaults: L2Config) -> sqac_core::Result<Self> {
        defaults.validate()?;
        Ok(Self {
            snapshot: RwLock::new(None),
            paths: Some(paths),
            defaults,
            month: None,
        })
    }

    /// A state over in-memory artifacts; `/reload` is unavailable.
    pub fn in_memory(snapshot: Snapshot, defaults: L2Config) -> Self {
        Self {
            snapshot: RwLock::new(Some(Arc::new(snapshot))),
            paths: None,
            defaults,
            month: None,
        }
    }

    /// Month used when a request does not name one; the wall clock otherwise.
    pub fn with_month(mut self, month: Option<Month>) -> Self {
        self.month = month;
        self
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.snapshot
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    pub fn reload(&self) -> sqac_core::Result<Arc<Snapshot>> {
        let paths = self.paths.as_ref().ok_or(sqac_core::Error::InvalidConfig(
            "no artifact paths to reload from".into(),
        ))?;
        let fresh = Arc::new(paths.load()?);
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Some(fresh.clone());
        Ok(fresh)
    }

    fn loaded(&self) -> Result<Arc<Snapshot>, ApiError> {
        self.snapshot().ok_or_else(|| ApiError {
            status: StatusCode::SERVICE_UNAVAILABLE,
            message: "artifacts not loaded".into(),
        })
    }

    fn month_of(&self, params: &HashMap<String, String>) -> Result<Month, ApiError> {
        match param::<u8>(params, "month")? {
            Some(m) => Month::new(m).map_err(|e| ApiError::bad_request(e.to_string())),
            None => Ok(self
                .month
                .unwrap_or_else(|| Month::new(Utc::now().month() as u8).expect("calendar month"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub query: String,
    pub rank: usize,
    pub final_score: f64,
    pub l1_score: f64,
    pub seasonality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub prefix: String,
    pub month: u8,
    pub suggestions: Vec<Suggestion>,
    pub latency_micros: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalityResponse {
    pub query: String,
    pub month: u8,
    pub seasonality: f64,
    /// January first.
    pub profile: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
    pub entries: usize,
    pub model_fingerprint: String,
    pub index_fingerprint: String,
    pub loaded_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(ErrorBody {
                error: self.message,
            }),
        )
            .into_response()
    }
}

type Params = Query<HashMap<String, String>>;

fn param<T: std::str::FromStr>(
    params: &HashMap<String, String>,
    name: &str,
) -> Result<Option<T>, ApiError> {
    params
        .get(name)
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| ApiError::bad_request(format!("invalid {name}: {v:?}")))
        })
        .transpose()
}

async fn complete(
    State(state): State<Arc<AppState>>,
    Query(params): Params,
) -> Result<Json<SuggestResponse>, ApiError> {
    let start = Instant::now();
    // An empty prefix completes to the global top K.
    let prefix = normalize_prefix(params.get("prefix").map_or("", String::as_str));
    let month = state.month_of(&params)?;
    let mut config = state.defaults;
    if let Some(alpha) = param(&params, "alpha")? {
        config.alpha = alpha;
    }
    if let Some(k) = param(&params, "k")? {
        config.k_display = k;
    }
    config
        .validate()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;

    let snap = state.loaded()?;
    let candidates = snap.index.complete(&prefix, config.n_candidates, Order::L1);
    let suggestions = l2_rerank(&candidates, month, &snap.scorer, &config)
        .into_iter()
        .map(|s| Suggestion {
            query: s.query,
            rank: s.rank,
            final_score: s.final_score,
            l1_score: s.l1_score,
            seasonality: s.seasonality,
        })
        .collect();
    Ok(Json(SuggestResponse {
        prefix,
        month: month.get(),
        suggestions,
        latency_micros: start.elapsed().as_micros() as u64,
    }))
}

async fn seasonality(
    State(state): State<Arc<AppState>>,
    Query(params): Params,
) -> Result<Json<SeasonalityResponse>, ApiError> {
    let query = normalize_query(params.get("q").map_or("", String::as_str));
    if query.is_empty() {
        return Err(ApiError::bad_request("missing or empty q"));
    }
    let month = state.month_of(&params)?;
    let profile = state.loaded()?.scorer.profile(&query);
    Ok(Json(SeasonalityResponse {
        query,
        month: month.get(),
        seasonality: profile[month.index()],
        profile: profile.to_vec(),
    }))
}

fn health_of(snap: &Snapshot) -> HealthResponse {
    HealthResponse {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        entries: snap.index.len(),
        model_fingerprint: snap.model_fingerprint.clone(),
        index_fingerprint: snap.index_fingerprint.clone(),
        loaded_at: snap.loaded_at.to_rfc3339(),
    }
}

async fn healthz(State(state): State<Arc<AppState>>) -> Result<Json<HealthResponse>, ApiError> {
    Ok(Json(health_of(&*state.loaded()?)))
}

async fn reload(State(state): State<Arc<AppState>>) -> Result<Json<HealthResponse>, ApiError> {
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || worker.reload())
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: e.to_string(),
        })?;
    match result {
        Ok(snap) => Ok(Json(health_of(&snap))),
        Err(e) => Err(ApiError {
            status: StatusCode::SERVICE_UNAVAILABLE,
            message: format!("reload failed, previous artifacts still serving: {e}"),
        }),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any);
    Router::new()
        .route("/complete", get(complete))
        .route("/seasonality", get(seasonality))
        .route("/healthz", get(healthz))
        .route("/reload", post(reload))
        .layer(cors)
        .with_state(state)
}

/// Serves until the listener fails or the process receives Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
