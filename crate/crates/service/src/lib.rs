//! HTTP API over interactive summarization sessions.
//!
//! Every session endpoint answers with a full [`ApiSession`] snapshot, so
//! clients never derive state locally. Mutations on one session are
//! serialized by a per-session lock, reads share it, and distinct sessions
//! run independently.

mod error;
mod snapshot;

use std::collections::HashMap;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::sync::RwLock as SessionLock;

use adasum::corpus::Corpus;
use adasum::feedback::FeedbackBatch;
use adasum::optimizer::DEFAULT_EXACT_CAP;
use adasum::session::{Session, SessionConfig};

pub use error::{ApiError, ErrorBody};
pub use snapshot::{ApiSession, BudgetUpdate, CorpusInfo, CreateSession, QueriesResponse, SummarySentence};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_CORPUS_CAP_BYTES: usize = 5 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub bind: IpAddr,
    pub port: u16,
    pub corpus_cap_bytes: usize,
    /// Upper limit on the exact solver's sentence cap for new sessions.
    pub exact_cap: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            corpus_cap_bytes: DEFAULT_CORPUS_CAP_BYTES,
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }
}

impl ServiceConfig {
    /// Reads `ADASUM_BIND`, `ADASUM_PORT`, `ADASUM_CORPUS_CAP_BYTES` and
    /// `ADASUM_EXACT_CAP` through `lookup`; unset variables keep defaults.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        fn parse<T: std::str::FromStr>(name: &str, value: Option<String>, default: T) -> Result<T, String> {
            match value {
                None => Ok(default),
                Some(v) => v.trim().parse().map_err(|_| format!("{name}: cannot parse `{v}`")),
            }
        }
        let d = ServiceConfig::default();
        Ok(ServiceConfig {
            bind: parse("ADASUM_BIND", lookup("ADASUM_BIND"), d.bind)?,
            port: parse("ADASUM_PORT", lookup("ADASUM_PORT"), d.port)?,
            corpus_cap_bytes: parse("ADASUM_CORPUS_CAP_BYTES", lookup("ADASUM_CORPUS_CAP_BYTES"), d.corpus_cap_bytes)?,
            exact_cap: parse("ADASUM_EXACT_CAP", lookup("ADASUM_EXACT_CAP"), d.exact_cap)?,
        })
    }

    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }
}

struct SessionEntry {
    corpus_id: String,
    session: Arc<SessionLock<Session>>,
}

pub struct AppState {
    config: ServiceConfig,
    corpora: RwLock<HashMap<String, Arc<Corpus>>>,
    sessions: RwLock<HashMap<String, SessionEntry>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(AppState {
            config,
            corpora: RwLock::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
        })
    }

    /// Registers a corpus directly; returns its id.
    pub fn add_corpus(&self, corpus: Corpus) -> String {
        let id = corpus_id(&corpus);
        self.corpora.write().unwrap().insert(id.clone(), Arc::new(corpus));
        id
    }

    fn corpus(&self, id: &str) -> Result<Arc<Corpus>, ApiError> {
        self.corpora
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("corpus", id))
    }

    fn session(&self, id: &str) -> Result<(String, Arc<SessionLock<Session>>), ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .map(|e| (e.corpus_id.clone(), e.session.clone()))
            .ok_or_else(|| ApiError::not_found("session", id))
    }
}

/// Upload ids are derived from content, so re-uploading is idempotent.
fn corpus_id(corpus: &Corpus) -> String {
    format!("c{}", &corpus.content_hash()[..16])
}

pub fn router(state: Arc<AppState>) -> Router {
    let cap = state.config.corpus_cap_bytes;
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/corpora", post(upload_corpus))
        .route("/corpora/{id}", get(get_corpus))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/queries", get(next_queries))
        .route("/sessions/{id}/feedback", post(submit_feedback))
        .route("/sessions/{id}/budget", post(amend_budget))
        .route("/sessions/{id}/satisfied", post(mark_satisfied))
        .route("/sessions/{id}/export", get(export))
        .layer(DefaultBodyLimit::max(cap))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(config.addr()).await?;
    serve_on(listener, config).await
}

/// Like [`serve`] on an already bound listener (useful with port 0).
pub async fn serve_on(listener: tokio::net::TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::new(config))).await
}

/// Runs CPU-bound session work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(v)| v).map_err(|e| ApiError::invalid_body(e.body_text()))
}

fn query_params<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(v)| v).map_err(|e| ApiError::invalid_body(e.body_text()))
}

#[derive(Debug, Default, Deserialize)]
struct UploadParams {
    cluster_id: Option<String>,
}

async fn upload_corpus(
    State(state): State<Arc<AppState>>,
    params: Result<Query<UploadParams>, QueryRejection>,
    req: Request,
) -> Result<Response, ApiError> {
    let cap = state.config.corpus_cap_bytes;
    let mut cluster_id = query_params(params)?.cluster_id;
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));

    let bytes = if is_multipart {
        let mut form = Multipart::from_request(req, &()).await.map_err(|e| ApiError::invalid_body(e.body_text()))?;
        let mut data = None;
        while let Some(field) = form.next_field().await.map_err(|e| multipart_error(e, cap))? {
            match field.name() {
                Some("cluster_id") => cluster_id = Some(field.text().await.map_err(|e| multipart_error(e, cap))?),
                _ if data.is_none() => {
                    if cluster_id.is_none() {
                        cluster_id = field.file_name().and_then(file_stem);
                    }
                    data = Some(field.bytes().await.map_err(|e| multipart_error(e, cap))?);
                }
                _ => {}
            }
        }
        data.ok_or_else(|| ApiError::validation("multipart body has no corpus file", Some("file")))?
    } else {
        axum::body::to_bytes(req.into_body(), cap).await.map_err(|_| ApiError::too_large(cap))?
    };
    if bytes.len() > cap {
        return Err(ApiError::too_large(cap));
    }
    let text = std::str::from_utf8(&bytes).map_err(|_| ApiError::validation("corpus is not UTF-8", Some("corpus")))?;
    let corpus = Corpus::from_jsonl(cluster_id.unwrap_or_else(|| "upload".into()), text)
        .map_err(|e| ApiError::validation(e.to_string(), Some("corpus")))?;
    let id = state.add_corpus(corpus);
    let info = CorpusInfo::of(&id, &*state.corpus(&id)?);
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

fn file_stem(name: &str) -> Option<String> {
    std::path::Path::new(name).file_stem().map(|s| s.to_string_lossy().into_owned())
}

fn multipart_error(e: axum::extract::multipart::MultipartError, cap: usize) -> ApiError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::too_large(cap)
    } else {
        ApiError::invalid_body(e.body_text())
    }
}

async fn get_corpus(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<CorpusInfo>, ApiError> {
    Ok(Json(CorpusInfo::of(&id, &*state.corpus(&id)?)))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = json_body(body)?;
    let corpus = state.corpus(&req.corpus_id)?;
    let service_cap = state.config.exact_cap;
    let raw = req.config.unwrap_or_else(|| serde_json::json!({}));
    let solver_given = raw.get("solver").is_some();
    let mut config: SessionConfig =
        serde_json::from_value(raw).map_err(|e| ApiError::validation(e.to_string(), Some("config")))?;
    config.solver.exact_cap = if solver_given { config.solver.exact_cap.min(service_cap) } else { service_cap };

    let session = blocking(move || Session::start(corpus, config).map_err(ApiError::from)).await?;
    let snapshot = ApiSession::of(&req.corpus_id, &session);
    state.sessions.write().unwrap().insert(
        snapshot.session_id.clone(),
        SessionEntry {
            corpus_id: req.corpus_id,
            session: Arc::new(SessionLock::new(session)),
        },
    );
    Ok((StatusCode::CREATED, Json(snapshot)).into_response())
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<ApiSession>, ApiError> {
    let (corpus_id, session) = state.session(&id)?;
    let session = session.read().await;
    Ok(Json(ApiSession::of(&corpus_id, &session)))
}

#[derive(Debug, Default, Deserialize)]
struct QueriesParams {
    k: Option<usize>,
}

async fn next_queries(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    params: Result<Query<QueriesParams>, QueryRejection>,
) -> Result<Json<QueriesResponse>, ApiError> {
    let params = query_params(params)?;
    let (_, session) = state.session(&id)?;
    let mut session = session.write().await;
    let k = params.k.unwrap_or(session.config().query_batch_size);
    if k == 0 {
        return Err(ApiError::validation("k must be at least 1", Some("k")));
    }
    let queries = session.next_queries(k)?;
    Ok(Json(QueriesResponse {
        session_id: id,
        iteration: session.iteration(),
        queries,
    }))
}

/// Locks the session, applies `f` off the executor and returns the snapshot.
async fn mutate(
    state: &AppState,
    id: &str,
    f: impl FnOnce(&mut Session) -> Result<(), ApiError> + Send + 'static,
) -> Result<Json<ApiSession>, ApiError> {
    let (corpus_id, session) = state.session(id)?;
    let mut guard = session.write_owned().await;
    let snapshot = blocking(move || {
        f(&mut guard)?;
        Ok(ApiSession::of(&corpus_id, &guard))
    })
    .await?;
    Ok(Json(snapshot))
}

/// The batch either alone or as `{"batch": ...}`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FeedbackBody {
    Wrapped { batch: FeedbackBatch },
    Bare(FeedbackBatch),
}

async fn submit_feedback(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<FeedbackBody>, JsonRejection>,
) -> Result<Json<ApiSession>, ApiError> {
    let batch = match json_body(body)? {
        FeedbackBody::Wrapped { batch } => batch,
        FeedbackBody::Bare(batch) => batch,
    };
    mutate(&state, &id, move |s| s.submit_feedback(batch).map_err(ApiError::from)).await
}

async fn amend_budget(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<BudgetUpdate>, JsonRejection>,
) -> Result<Json<ApiSession>, ApiError> {
    let update = json_body(body)?;
    mutate(&state, &id, move |s| s.amend_budget(update.budget).map_err(ApiError::from)).await
}

async fn mark_satisfied(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<ApiSession>, ApiError> {
    mutate(&state, &id, |s| {
        s.mark_satisfied();
        Ok(())
    })
    .await
}

#[derive(Debug, Default, Deserialize)]
struct ExportParams {
    format: Option<String>,
}

async fn export(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    params: Result<Query<ExportParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let params = query_params(params)?;
    let (_, session) = state.session(&id)?;
    let session = session.read().await;
    match params.format.as_deref().unwrap_or("structured") {
        "structured" => Ok(Json(session.export()).into_response()),
        "text" => Ok((
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            Body::from(session.summary_text()),
        )
            .into_response()),
        other => Err(ApiError::validation(
            format!("unknown export format `{other}` (expected text or structured)"),
            Some("format"),
        )),
    }
}
