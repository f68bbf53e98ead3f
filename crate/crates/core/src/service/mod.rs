//! HTTP+JSON access to elicitation sessions under `/v1`.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/v1/sessions` | create a session from values, CSV text, a synthetic spec or the quiz stand-in |
//! | POST | `/v1/sessions/{id}/advance` | run the proposal of the current stage |
//! | POST | `/v1/sessions/{id}/edits` | apply card edits, all or none |
//! | POST | `/v1/sessions/{id}/commit` | commit the edited chain(s) |
//! | POST | `/v1/sessions/{id}/finalize` | freeze the partition |
//! | GET | `/v1/sessions/{id}` | full session document |
//! | GET | `/v1/sessions/{id}/partition` | current or final partition |
//! | GET | `/v1/sessions/{id}/plotdata` | dataset summary and sampled class curves |
//! | GET | `/v1/sessions/{id}/transcript` | replayable transcript |
//!
//! Every response carries `schema_version`. Errors are
//! `{"schema_version", "error", "message"}` plus `fields` (400) or `index`
//! (422 for a rejected edit). Writers to one session are serialised: a
//! second concurrent mutation waits for the first to be persisted.

mod store;

pub use store::{SessionStore, StoreError};

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::cards::CardEdit;
use crate::cfkm::SampleSet;
use crate::data::{quiz_standin, read_csv, summarize, synth_generate, Shape};
use crate::fuzzy::FuzzyPartition;
use crate::pipeline::{
    AdvanceRequest, ChainTarget, CommitRequest, PipelineError, Session, SessionParams, Stage, SCHEMA_VERSION,
};

/// Points per class curve in the plot data.
pub const PLOT_GRID: usize = 401;
const HISTOGRAM_BINS: usize = 30;

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    /// Parameters used for fields a create request leaves out.
    pub defaults: SessionParams,
}

impl AppState {
    pub fn new(store: SessionStore, defaults: SessionParams) -> Self {
        Self { store: Arc::new(store), defaults }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Values {
        values: Vec<f64>,
        #[serde(default)]
        bounds: Option<(f64, f64)>,
    },
    Csv {
        text: String,
        column: String,
        #[serde(default)]
        bounds: Option<(f64, f64)>,
    },
    Synth {
        shape: Shape,
        n: usize,
        #[serde(default)]
        seed: u64,
    },
    QuizStandin,
}

impl DatasetSpec {
    pub fn load(&self) -> Result<SampleSet, String> {
        match self {
            DatasetSpec::Values { values, bounds: Some((a, b)) } => {
                SampleSet::new(values.clone(), *a, *b).map_err(|e| e.to_string())
            }
            DatasetSpec::Values { values, bounds: None } => {
                SampleSet::from_data(values.clone()).map_err(|e| e.to_string())
            }
            DatasetSpec::Csv { text, column, bounds } => {
                read_csv(text.as_bytes(), column, *bounds).map(|loaded| loaded.samples).map_err(|e| e.to_string())
            }
            DatasetSpec::Synth { shape, n, seed } => synth_generate(*shape, *n, *seed).map_err(|e| e.to_string()),
            DatasetSpec::QuizStandin => Ok(quiz_standin()),
        }
    }
}

#[derive(Debug)]
pub enum ApiError {
    Validation { message: String, fields: Map<String, Value> },
    NotFound(String),
    Conflict(String),
    Unprocessable { message: String, index: Option<usize> },
    Internal(String),
}

impl ApiError {
    fn bad_request(field: &str, message: impl Into<String>) -> Self {
        let message = message.into();
        let mut fields = Map::new();
        fields.insert(field.to_string(), Value::String(message.clone()));
        ApiError::Validation { message, fields }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let message = e.to_string();
        match e {
            PipelineError::Stage { .. } => ApiError::Conflict(message),
            PipelineError::Params(_) | PipelineError::Request(_) => {
                ApiError::Validation { message, fields: Map::new() }
            }
            PipelineError::Edit { index, .. } => ApiError::Unprocessable { message, index: Some(index) },
            _ => ApiError::Unprocessable { message, index: None },
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => ApiError::NotFound(e.to_string()),
            _ => ApiError::Internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Validation { message, fields } => {
                (StatusCode::BAD_REQUEST, json!({"error": "validation", "message": message, "fields": fields}))
            }
            ApiError::NotFound(message) => (StatusCode::NOT_FOUND, json!({"error": "not_found", "message": message})),
            ApiError::Conflict(message) => {
                (StatusCode::CONFLICT, json!({"error": "illegal_stage", "message": message}))
            }
            ApiError::Unprocessable { message, index } => {
                let mut body = json!({"error": "unprocessable", "message": message});
                if let Some(index) = index {
                    body["error"] = json!("invalid_edit");
                    body["index"] = json!(index);
                }
                (StatusCode::UNPROCESSABLE_ENTITY, body)
            }
            ApiError::Internal(message) => {
                log::error!("{message}");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "internal", "message": message}))
            }
        };
        (status, versioned(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn versioned(mut body: Value) -> Json<Value> {
    body["schema_version"] = json!(SCHEMA_VERSION);
    Json(body)
}

/// Parses an optional JSON body; an empty body yields the default.
fn parse_body<T: for<'de> Deserialize<'de> + Default>(bytes: &Bytes) -> ApiResult<T> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request("body", e.to_string()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/:id", get(get_session))
        .route("/v1/sessions/:id/advance", post(advance))
        .route("/v1/sessions/:id/edits", post(edits))
        .route("/v1/sessions/:id/commit", post(commit))
        .route("/v1/sessions/:id/finalize", post(finalize))
        .route("/v1/sessions/:id/partition", get(partition))
        .route("/v1/sessions/:id/plotdata", get(plotdata))
        .route("/v1/sessions/:id/transcript", get(transcript))
        .with_state(state)
}

fn merge_params(defaults: &SessionParams, overrides: Option<&Value>) -> ApiResult<SessionParams> {
    let mut merged = serde_json::to_value(defaults).expect("params serialise");
    match overrides {
        None | Some(Value::Null) => {}
        Some(Value::Object(fields)) => {
            for (key, value) in fields {
                if merged.get(key).is_none() {
                    return Err(ApiError::bad_request(&format!("params.{key}"), "unknown parameter"));
                }
                merged[key] = value.clone();
            }
        }
        Some(_) => return Err(ApiError::bad_request("params", "must be an object")),
    }
    let params: SessionParams =
        serde_json::from_value(merged).map_err(|e| ApiError::bad_request("params", e.to_string()))?;
    let errors = params.field_errors();
    if !errors.is_empty() {
        let message = errors.iter().map(|(f, m)| format!("{f}: {m}")).collect::<Vec<_>>().join("; ");
        let fields = errors.into_iter().map(|(f, m)| (format!("params.{f}"), Value::String(m))).collect();
        return Err(ApiError::Validation { message, fields });
    }
    Ok(params)
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let request: Value = parse_body(&body)?;
    let Some(dataset) = request.get("dataset") else {
        return Err(ApiError::bad_request("dataset", "required"));
    };
    let spec: DatasetSpec =
        serde_json::from_value(dataset.clone()).map_err(|e| ApiError::bad_request("dataset", e.to_string()))?;
    let params = merge_params(&state.defaults, request.get("params"))?;
    let data = spec.load().map_err(|e| ApiError::bad_request("dataset", e))?;
    let session = Session::new(data, params)?;
    state.store.save(&session)?;
    log::info!("created session {}", session.id());
    let body = versioned(json!({"session_id": session.id(), "stage": session.stage()}));
    Ok((StatusCode::CREATED, body).into_response())
}

/// Loads, mutates and persists one session under its write lock.
async fn mutate<T>(
    state: &AppState,
    id: &str,
    op: impl FnOnce(&mut Session) -> ApiResult<T>,
) -> ApiResult<(Session, T)> {
    let _guard = state.store.lock(id).await;
    let mut session = state.store.load(id)?;
    let out = op(&mut session)?;
    state.store.save(&session)?;
    Ok((session, out))
}

async fn advance(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let request: AdvanceRequest = parse_body(&body)?;
    let (session, proposal) = mutate(&state, &id, |s| Ok(s.advance(&request)?)).await?;
    let summary = summarize(session.dataset(), HISTOGRAM_BINS, None).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(versioned(json!({
        "session_id": session.id(),
        "stage": session.stage(),
        "proposal": proposal,
        "summary": summary,
    })))
}

#[derive(Debug, Default, Deserialize)]
#[serde(untagged)]
enum EditsBody {
    #[default]
    Empty,
    List(Vec<CardEdit>),
    Targeted {
        #[serde(default)]
        target: Option<ChainTarget>,
        edits: Vec<CardEdit>,
    },
}

async fn edits(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let (target, list) = match parse_body::<EditsBody>(&body)? {
        EditsBody::Empty => (None, Vec::new()),
        EditsBody::List(list) => (None, list),
        EditsBody::Targeted { target, edits } => (target, edits),
    };
    let (session, chain) = mutate(&state, &id, |s| Ok(s.apply_edits(target, &list)?)).await?;
    Ok(versioned(json!({
        "session_id": session.id(),
        "stage": session.stage(),
        "chain": chain,
        "refinement": session.refinement(),
    })))
}

async fn commit(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let request: CommitRequest = parse_body(&body)?;
    let (session, outcome) = mutate(&state, &id, |s| Ok(s.commit(&request)?)).await?;
    Ok(versioned(json!({"session_id": session.id(), "stage": session.stage(), "outcome": outcome})))
}

async fn finalize(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let (session, output) = mutate(&state, &id, |s| Ok(s.finalize()?)).await?;
    Ok(versioned(json!({"session_id": session.id(), "stage": session.stage(), "final": output})))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let session = state.store.load(&id)?;
    Ok(Json(serde_json::to_value(&session).expect("sessions serialise")))
}

fn current_partition(session: &Session) -> ApiResult<&FuzzyPartition> {
    session.partition().ok_or_else(|| {
        ApiError::Conflict(format!("no partition before step 1 is committed (stage {:?})", session.stage()))
    })
}

async fn partition(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let session = state.store.load(&id)?;
    let partition = current_partition(&session)?;
    Ok(versioned(json!({
        "session_id": session.id(),
        "stage": session.stage(),
        "final": session.stage() == Stage::Finalized,
        "partition": partition,
    })))
}

async fn plotdata(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let session = state.store.load(&id)?;
    let summary = summarize(session.dataset(), HISTOGRAM_BINS, None).map_err(|e| ApiError::Internal(e.to_string()))?;
    let curves = session.partition().map(|p| {
        let grid = p.grid(PLOT_GRID);
        let classes: Vec<Vec<f64>> = p.classes().iter().map(|c| grid.iter().map(|&x| c.eval(x)).collect()).collect();
        let polylines: Vec<_> = p.classes().iter().map(|c| c.breakpoints()).collect();
        json!({"grid": grid, "classes": classes, "polylines": polylines})
    });
    Ok(versioned(json!({
        "session_id": session.id(),
        "stage": session.stage(),
        "summary": summary,
        "curves": curves,
        "centroids": session.centroids(),
        "cores": session.cores(),
    })))
}

async fn transcript(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let session = state.store.load(&id)?;
    Ok(versioned(json!({"session_id": session.id(), "transcript": session.transcript()})))
}

/// Serves the API until interrupted.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {} (store {})", listener.local_addr()?, state.store.root().display());
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
