//! HTTP API over the session store. See `docs/http-api.md`.

use crate::backend::BackendSelector;
use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use changescope_core::llm::CompletionBackend;
use changescope_core::navigator::memory::{Clock, DialogueHistory, SystemClock, TickClock};
use changescope_core::navigator::session::{ImageRecord, Session, SessionError, Temporal};
use changescope_core::navigator::{run_query, AgentConfig, AgentError, Trace};
use changescope_core::raster::{CropRegion, RasterError};
use changescope_core::toolkit::{FixtureStore, ToolSpec, Toolkit};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock, TryLockError};
use std::time::{SystemTime, UNIX_EPOCH};

pub const API_VERSION: u32 = 1;
pub const MAX_UPLOAD_BYTES: usize = 32 * 1024 * 1024;
const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub backend: BackendSelector,
    pub fixtures: Option<PathBuf>,
    /// Directory the sessions are persisted to and restored from.
    pub store: Option<PathBuf>,
    pub agent: AgentConfig,
    pub remote: Vec<(String, String)>,
    /// Fixed id seed and logical clock; session `n` gets `seed + n`.
    pub seed: Option<u64>,
}

impl ServerConfig {
    pub fn new(backend: BackendSelector) -> Self {
        Self {
            backend,
            fixtures: None,
            store: None,
            agent: AgentConfig::default(),
            remote: Vec::new(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub session_id: String,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pub image_count: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CropBody {
    pub parent_id: String,
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct QueryBody {
    pub question: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryResponse {
    pub answer: String,
    pub tools_used: Vec<String>,
    pub trace: Trace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Trace>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    trace: Option<Box<Trace>>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            trace: None,
        }
    }

    fn busy() -> Self {
        Self::new(StatusCode::CONFLICT, "session is busy with another request")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.message,
            trace: self.trace.map(|t| *t),
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::UnknownImage(_) | SessionError::UnknownParent(_) => StatusCode::NOT_FOUND,
            SessionError::DimensionMismatch { .. } | SessionError::PairRoleTaken(..) => StatusCode::CONFLICT,
            SessionError::Io(_) | SessionError::State(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct SlotInner {
    session: Session,
    backend: Option<Box<dyn CompletionBackend>>,
    traces: Vec<Trace>,
}

struct Slot {
    id: String,
    created_at: u64,
    inner: Mutex<SlotInner>,
}

impl Slot {
    fn lock(&self) -> ApiResult<std::sync::MutexGuard<'_, SlotInner>> {
        match self.inner.try_lock() {
            Ok(g) => Ok(g),
            Err(TryLockError::WouldBlock) => Err(ApiError::busy()),
            Err(TryLockError::Poisoned(p)) => Ok(p.into_inner()),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SlotMeta {
    session_id: String,
    created_at: u64,
}

pub struct AppState {
    config: ServerConfig,
    toolkit: Toolkit,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    /// Encoded PNGs by image id, so image reads never wait on a session.
    images: RwLock<HashMap<String, Arc<Vec<u8>>>>,
    counter: AtomicU64,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl AppState {
    pub fn new(config: ServerConfig) -> Result<Arc<Self>, String> {
        let mut toolkit = Toolkit::standard(config.fixtures.clone().map(FixtureStore::new));
        for (tool, endpoint) in &config.remote {
            toolkit.route_remote(tool, endpoint).map_err(|e| e.to_string())?;
        }
        let state = Arc::new(Self {
            config,
            toolkit,
            sessions: RwLock::new(HashMap::new()),
            images: RwLock::new(HashMap::new()),
            counter: AtomicU64::new(0),
        });
        state.restore().map_err(|e| format!("restoring session store: {e}"))?;
        Ok(state)
    }

    fn clock(&self) -> Arc<dyn Clock> {
        if self.config.seed.is_some() {
            Arc::new(TickClock::starting_at(0))
        } else {
            Arc::new(SystemClock)
        }
    }

    fn restore(&self) -> Result<(), SessionError> {
        let Some(store) = &self.config.store else {
            return Ok(());
        };
        std::fs::create_dir_all(store)?;
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(store)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("meta.json").exists())
            .collect();
        dirs.sort();
        for dir in dirs {
            let meta: SlotMeta = serde_json::from_slice(&std::fs::read(dir.join("meta.json"))?)?;
            let session = Session::import(&dir, self.clock())?;
            let traces = match std::fs::read(dir.join("traces.json")) {
                Ok(b) => serde_json::from_slice(&b)?,
                Err(_) => Vec::new(),
            };
            self.publish_images(&session);
            let slot = Slot {
                id: meta.session_id.clone(),
                created_at: meta.created_at,
                inner: Mutex::new(SlotInner {
                    session,
                    backend: None,
                    traces,
                }),
            };
            self.counter.fetch_add(1, Ordering::SeqCst);
            self.sessions.write().unwrap().insert(meta.session_id, Arc::new(slot));
        }
        Ok(())
    }

    fn slot(&self, id: &str) -> ApiResult<Arc<Slot>> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session '{id}'")))
    }

    fn create(&self) -> ApiResult<SessionHandle> {
        let n = self.counter.fetch_add(1, Ordering::SeqCst);
        let seed = match self.config.seed {
            Some(s) => s.wrapping_add(n),
            None => rand::random(),
        };
        let mut id = format!("s{:012x}", rand::random::<u64>() & 0xffff_ffff_ffff);
        while self.sessions.read().unwrap().contains_key(&id) {
            id = format!("s{:012x}", rand::random::<u64>() & 0xffff_ffff_ffff);
        }
        let slot = Arc::new(Slot {
            id: id.clone(),
            created_at: now_ms(),
            inner: Mutex::new(SlotInner {
                session: Session::with_clock(seed, self.clock()),
                backend: None,
                traces: Vec::new(),
            }),
        });
        self.persist(&slot, &*slot.lock()?)?;
        self.sessions.write().unwrap().insert(id.clone(), slot.clone());
        Ok(SessionHandle {
            session_id: id,
            created_at: slot.created_at,
            image_count: 0,
        })
    }

    fn publish_images(&self, session: &Session) {
        let mut images = self.images.write().unwrap();
        for rec in session.records() {
            if images.contains_key(rec.self_id.as_str()) {
                continue;
            }
            match session.png_bytes(rec.self_id.as_str()) {
                Ok(png) => {
                    images.insert(rec.self_id.to_string(), Arc::new(png));
                }
                Err(e) => tracing::warn!(image = %rec.self_id, error = %e, "cannot encode image"),
            }
        }
    }

    fn persist(&self, slot: &Slot, inner: &SlotInner) -> ApiResult<()> {
        let Some(store) = &self.config.store else {
            return Ok(());
        };
        let dir = store.join(&slot.id);
        let io = |e: std::io::Error| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("store: {e}"));
        inner.session.export(&dir)?;
        let meta = SlotMeta {
            session_id: slot.id.clone(),
            created_at: slot.created_at,
        };
        std::fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&meta).expect("meta")).map_err(io)?;
        std::fs::write(dir.join("traces.json"), serde_json::to_vec_pretty(&inner.traces).expect("traces")).map_err(io)?;
        Ok(())
    }

    fn after_change(&self, slot: &Slot, inner: &SlotInner) -> ApiResult<()> {
        self.publish_images(&inner.session);
        self.persist(slot, inner)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/tools", get(list_tools))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/images", post(upload_image).get(list_images))
        .route("/sessions/{id}/crop", post(crop))
        .route("/sessions/{id}/query", post(query))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/traces", get(traces))
        .route("/images/{image_id}", get(image))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "api_version": API_VERSION }))
}

async fn list_tools(State(state): State<Arc<AppState>>) -> Json<Vec<ToolSpec>> {
    Json(state.toolkit.specs().cloned().collect())
}

async fn create_session(State(state): State<Arc<AppState>>) -> ApiResult<(StatusCode, Json<SessionHandle>)> {
    Ok((StatusCode::CREATED, Json(state.create()?)))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionHandle>> {
    let slot = state.slot(&id)?;
    let inner = slot.lock()?;
    Ok(Json(SessionHandle {
        session_id: slot.id.clone(),
        created_at: slot.created_at,
        image_count: inner.session.image_count(),
    }))
}

#[derive(Deserialize)]
struct UploadParams {
    role: Option<String>,
    pair: Option<String>,
}

async fn upload_image(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(params): Query<UploadParams>,
    body: Bytes,
) -> ApiResult<Json<ImageRecord>> {
    let slot = state.slot(&id)?;
    let role: Temporal = params
        .role
        .as_deref()
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing role=pre|cur"))?
        .parse()
        .map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    if !body.starts_with(PNG_MAGIC) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "body must be a PNG image"));
    }
    let mut inner = slot.lock()?;
    let rec = inner.session.register_image(&body, role, params.pair.as_deref())?;
    state.after_change(&slot, &inner)?;
    Ok(Json(rec))
}

async fn list_images(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Vec<ImageRecord>>> {
    let slot = state.slot(&id)?;
    let inner = slot.lock()?;
    Ok(Json(inner.session.records().cloned().collect()))
}

async fn crop(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<CropBody>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<ImageRecord>> {
    let slot = state.slot(&id)?;
    let Json(b) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    let bad = |m: &str| ApiError::new(StatusCode::BAD_REQUEST, m);
    if b.x < 0 || b.y < 0 {
        return Err(bad("x and y must be non-negative"));
    }
    if b.w <= 0 || b.h <= 0 {
        return Err(bad("w and h must be positive"));
    }
    let fits = |v: i64| u32::try_from(v).map_err(|_| bad("crop coordinates too large"));
    let region = CropRegion::new(fits(b.x)?, fits(b.y)?, fits(b.w)?, fits(b.h)?);
    let mut inner = slot.lock()?;
    let rec = inner.session.crop_and_register(&b.parent_id, region).map_err(|e| match e {
        SessionError::Raster(RasterError::OutOfBounds { .. }) => ApiError::new(StatusCode::BAD_REQUEST, e.to_string()),
        other => other.into(),
    })?;
    state.after_change(&slot, &inner)?;
    Ok(Json(rec))
}

async fn query(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<QueryBody>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<QueryResponse>> {
    let slot = state.slot(&id)?;
    let Json(b) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    if b.question.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "question is empty"));
    }
    let st = state.clone();
    tokio::task::spawn_blocking(move || run_session_query(&st, &slot, b.question.trim()))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map(Json)
}

fn run_session_query(state: &AppState, slot: &Slot, question: &str) -> ApiResult<QueryResponse> {
    let mut guard = slot.lock()?;
    let inner = &mut *guard;
    if inner.backend.is_none() {
        let backend = state
            .config
            .backend
            .open()
            .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, format!("backend: {e}")))?;
        inner.backend = Some(backend);
    }
    let backend = inner.backend.as_mut().expect("set above");
    let result = run_query(&mut inner.session, &state.toolkit, backend, question, &state.config.agent);
    let (response, error) = match result {
        Ok(trace) => (Some(trace), None),
        Err(AgentError::NoImages) => {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "upload images before asking"))
        }
        Err(AgentError::Toolkit(e)) => return Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
        Err(e @ AgentError::Backend { .. }) => {
            let trace = e.trace().cloned().map(Box::new);
            (None, Some(ApiError {
                status: StatusCode::BAD_GATEWAY,
                message: e.to_string(),
                trace,
            }))
        }
        // step-limit and parse failures still produce an answer (the marker)
        Err(e) => (e.trace().cloned(), None),
    };
    if let Some(t) = &response {
        inner.traces.push(t.clone());
    }
    state.after_change(slot, inner)?;
    match (response, error) {
        (Some(trace), _) => Ok(QueryResponse {
            answer: trace.final_answer.clone(),
            tools_used: trace.tools_used.clone(),
            trace,
        }),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("either a trace or an error"),
    }
}

async fn history(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<DialogueHistory>> {
    let slot = state.slot(&id)?;
    let inner = slot.lock()?;
    Ok(Json(inner.session.history().clone()))
}

async fn traces(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Vec<Trace>>> {
    let slot = state.slot(&id)?;
    let inner = slot.lock()?;
    Ok(Json(inner.traces.clone()))
}

async fn image(State(state): State<Arc<AppState>>, Path(image_id): Path<String>) -> ApiResult<Response> {
    let key = image_id.trim_end_matches(".png");
    let key = key.split('_').next().unwrap_or(key);
    let png = state
        .images
        .read()
        .unwrap()
        .get(key)
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown image '{image_id}'")))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], (*png).clone()).into_response())
}

/// Binds and serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
