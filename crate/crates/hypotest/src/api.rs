//! JSON-over-HTTP interface to the engine.
//!
//! Ingestion is the only mutating endpoint and takes the write lock for the
//! whole batch, so a concurrent test observes the store either before or
//! after a batch, never in between.

use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, RawQuery, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{any, get, post};
use axum::{Json, Router};
use hypotest_core::corpus::DocumentRecord;
use hypotest_core::network::{export_network, ExportFormat, NetworkOptions, SecondaryNetwork};
use hypotest_core::stats::{StatsError, SupportMode, SupportOptions, TestParams, TestResult};
use hypotest_core::{Engine, EngineError, HypothesisError, IngestReport, Relation};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use tower_http::services::ServeDir;

use crate::config::{self, ApiConfig};

pub type SharedEngine = Arc<RwLock<Engine>>;

/// Request bodies above this size are refused.
pub const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;
pub const DEFAULT_ENTITY_LIMIT: usize = 20;

#[derive(Clone)]
pub struct AppState {
    pub engine: SharedEngine,
    pub alpha: f64,
    pub max_hops: Option<usize>,
}

impl AppState {
    pub fn new(engine: Engine, config: &ApiConfig) -> Self {
        Self {
            engine: Arc::new(RwLock::new(engine)),
            alpha: config.alpha,
            max_hops: config.max_hops,
        }
    }
}

/// Error body: `{"code": ..., "message": ..., ...details}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Map<String, Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.details.insert(key.to_string(), value.into());
        self
    }

    fn not_found() -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = Map::new();
        body.insert("code".into(), self.code.into());
        body.insert("message".into(), self.message.into());
        body.extend(self.details);
        (self.status, Json(Value::Object(body))).into_response()
    }
}

impl From<HypothesisError> for ApiError {
    fn from(e: HypothesisError) -> Self {
        let message = e.to_string();
        match e {
            HypothesisError::UnrecognizedEntities { matched } => {
                let missing = 2 - matched.len();
                ApiError::new(StatusCode::BAD_REQUEST, "unrecognized_entities", message)
                    .with("matched", matched)
                    .with("missing", missing)
            }
            HypothesisError::Ambiguous { matched } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "too_many_entities", message).with("matched", matched)
            }
            HypothesisError::UnknownEntity(name) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_entity", message).with("entity", name)
            }
            HypothesisError::SameEntity(id) => {
                ApiError::new(StatusCode::BAD_REQUEST, "same_entity", message).with("entity", id)
            }
            HypothesisError::UnknownPredicate(p) => {
                ApiError::new(StatusCode::BAD_REQUEST, "unknown_predicate", message).with("predicate", p)
            }
            HypothesisError::RenderMismatch { text } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "render_mismatch", message).with("text", text)
            }
        }
    }
}

impl From<StatsError> for ApiError {
    fn from(e: StatsError) -> Self {
        let code = match e {
            StatsError::NonPositiveExpected(_) => "invalid_expected",
            StatsError::InvalidAlpha(_) => "invalid_alpha",
            StatsError::NegativeChiSquare(_) | StatsError::ZeroDegreesOfFreedom => {
                return ApiError::internal(e.to_string())
            }
        };
        ApiError::new(StatusCode::BAD_REQUEST, code, e.to_string())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let message = e.to_string();
        match e {
            EngineError::Hypothesis(h) => h.into(),
            EngineError::Stats(s) => s.into(),
            EngineError::InvalidRecord { index, .. } => {
                ApiError::new(StatusCode::BAD_REQUEST, "malformed_record", message).with("index", index)
            }
            EngineError::ConflictingDocument { index, id } => {
                ApiError::new(StatusCode::CONFLICT, "conflicting_document", message)
                    .with("index", index)
                    .with("id", id)
            }
            EngineError::UnknownEntity(name) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_entity", message).with("entity", name)
            }
            EngineError::NoSeeds => ApiError::new(StatusCode::BAD_REQUEST, "missing_entity", message),
            EngineError::Corpus(_) | EngineError::Store(_) => {
                tracing::error!("storage failure: {message}");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", message)
            }
        }
    }
}

impl From<BytesRejection> for ApiError {
    fn from(e: BytesRejection) -> Self {
        ApiError::new(e.status(), "invalid_body", e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", e.to_string()))
}

/// Runs blocking engine work off the async workers.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn hop_override<'de, D>(d: D) -> Result<Option<Option<usize>>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    config::hops::deserialize(d).map(Some)
}

/// Test options shared by the textual and graphical hypothesis endpoints.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct TestOptions {
    pub expected: Option<f64>,
    pub alpha: Option<f64>,
    pub mode: Option<SupportMode>,
    pub match_predicate: Option<bool>,
    /// Hop bound for the returned network; the server default when absent.
    #[serde(default, deserialize_with = "hop_override")]
    pub max_hops: Option<Option<usize>>,
    #[serde(default)]
    pub positive_only: bool,
}

#[derive(Debug, Deserialize)]
pub struct HypothesisRequest {
    pub text: String,
    #[serde(flatten)]
    pub options: TestOptions,
}

#[derive(Debug, Deserialize)]
pub struct GraphHypothesisRequest {
    pub subject: String,
    pub object: String,
    pub predicate: String,
    #[serde(default)]
    pub negated: bool,
    #[serde(flatten)]
    pub options: TestOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisResponse {
    /// The tested hypothesis text.
    pub text: String,
    pub result: TestResult,
    pub network: SecondaryNetwork,
}

impl TestOptions {
    fn params(&self, default_alpha: f64) -> ApiResult<TestParams> {
        let expected = self.expected.ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_expected",
                "expected frequency is required",
            )
        })?;
        let params = TestParams {
            expected,
            alpha: self.alpha.unwrap_or(default_alpha),
            support: SupportOptions {
                mode: self.mode.unwrap_or_default(),
                match_predicate: self.match_predicate.unwrap_or(false),
            },
        };
        params.validate()?;
        Ok(params)
    }

    fn network(&self, default_hops: Option<usize>) -> NetworkOptions {
        NetworkOptions {
            max_hops: self.max_hops.unwrap_or(default_hops),
            positive_only: self.positive_only,
        }
    }
}

/// Tests `text` and builds the network seeded by its two entities, all
/// under one read guard.
fn test_text(engine: &Engine, text: &str, params: &TestParams, net: NetworkOptions) -> ApiResult<HypothesisResponse> {
    let result = engine.test_hypothesis(text, params)?;
    let seeds = [result.hypothesis.subject.clone(), result.hypothesis.object.clone()];
    let network = engine.network_for_ids(&seeds, net);
    Ok(HypothesisResponse {
        text: text.trim().to_string(),
        result,
        network,
    })
}

async fn post_hypothesis(
    State(state): State<AppState>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<HypothesisResponse>> {
    let req: HypothesisRequest = parse_json(&body?)?;
    if req.text.trim().is_empty() {
        return Err(
            ApiError::new(StatusCode::BAD_REQUEST, "empty_hypothesis", "hypothesis text is empty")
                .with("matched", Vec::<String>::new())
                .with("missing", 2),
        );
    }
    let params = req.options.params(state.alpha)?;
    let net = req.options.network(state.max_hops);
    let engine = state.engine.clone();
    blocking(move || test_text(&engine.read(), &req.text, &params, net))
        .await
        .map(Json)
}

async fn post_graph_hypothesis(
    State(state): State<AppState>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<HypothesisResponse>> {
    let req: GraphHypothesisRequest = parse_json(&body?)?;
    let net = req.options.network(state.max_hops);
    let alpha = state.alpha;
    let engine = state.engine.clone();
    blocking(move || {
        let engine = engine.read();
        let (_, text) = engine.hypothesis_from_selection(&req.subject, &req.object, &req.predicate, req.negated)?;
        let params = req.options.params(alpha)?;
        test_text(&engine, &text, &params, net)
    })
    .await
    .map(Json)
}

/// Accepts a JSON array of records or JSONL. Errors carry the 0-based
/// index of the offending record.
pub fn parse_ingest_body(body: &[u8]) -> ApiResult<Vec<DocumentRecord>> {
    let text = std::str::from_utf8(body).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_body",
            format!("body is not UTF-8: {e}"),
        )
    })?;
    let malformed = |index: usize, message: String| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "malformed_record",
            format!("record {index}: {message}"),
        )
        .with("index", index)
    };
    if text.trim_start().starts_with('[') {
        let values: Vec<Value> = serde_json::from_str(text)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", e.to_string()))?;
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| serde_json::from_value(v).map_err(|e| malformed(i, e.to_string())))
            .collect()
    } else {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, line)| serde_json::from_str(line).map_err(|e| malformed(i, e.to_string())))
            .collect()
    }
}

async fn post_documents(
    State(state): State<AppState>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<IngestReport>> {
    let records = parse_ingest_body(&body?)?;
    let engine = state.engine.clone();
    let report = blocking(move || Ok(engine.write().ingest(records)?)).await?;
    tracing::info!(
        ingested = report.ingested,
        added = report.documents_added,
        relations = report.relations_added,
        "ingested documents"
    );
    Ok(Json(report))
}

#[derive(Debug, Serialize)]
struct DocumentView {
    doc_id: String,
    title: String,
    text: String,
    relations: Vec<Relation>,
}

async fn get_document(
    State(state): State<AppState>,
    UrlPath(doc_id): UrlPath<String>,
) -> ApiResult<Json<DocumentView>> {
    let engine = state.engine.read();
    let doc = engine.corpus().get(&doc_id).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_document",
            format!("no document {doc_id:?}"),
        )
        .with("doc_id", doc_id.clone())
    })?;
    let relations = engine.store().paper_graph(&doc_id).map(|g| g.edges).unwrap_or_default();
    Ok(Json(DocumentView {
        doc_id: doc.doc_id.clone(),
        title: doc.title.clone(),
        text: doc.text.clone(),
        relations,
    }))
}

fn query_pairs(raw: Option<&str>) -> Vec<(String, String)> {
    raw.map(|q| form_urlencoded::parse(q.as_bytes()).into_owned().collect())
        .unwrap_or_default()
}

fn parse_flag(key: &str, value: &str) -> ApiResult<bool> {
    match value.to_ascii_lowercase().as_str() {
        "" | "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        _ => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_parameter",
            format!("{key} must be a boolean"),
        )
        .with("parameter", key)),
    }
}

async fn get_network(State(state): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult<Response> {
    let mut entities = Vec::new();
    let mut opts = NetworkOptions {
        max_hops: state.max_hops,
        positive_only: false,
    };
    let mut format = ExportFormat::Json;
    for (key, value) in query_pairs(raw.as_deref()) {
        match key.as_str() {
            "entity" => entities.push(value),
            "max_hops" => {
                opts.max_hops = config::parse_hops(&value).map_err(|m| {
                    ApiError::new(StatusCode::BAD_REQUEST, "invalid_parameter", m).with("parameter", "max_hops")
                })?
            }
            "positive_only" => opts.positive_only = parse_flag(&key, &value)?,
            "format" => {
                format = value.parse().map_err(|e: hypotest_core::network::NetworkError| {
                    ApiError::new(StatusCode::BAD_REQUEST, "invalid_parameter", e.to_string())
                        .with("parameter", "format")
                })?
            }
            _ => {}
        }
    }
    let network = state.engine.read().network(&entities, opts)?;
    let body = export_network(&network, format);
    let content_type = match format {
        ExportFormat::Json => "application/json",
        ExportFormat::Dot => "text/vnd.graphviz; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], body).into_response())
}

#[derive(Debug, Serialize)]
struct EntityView<'a> {
    id: &'a str,
    name: &'a str,
    #[serde(rename = "type")]
    entity_type: &'a str,
    aliases: Vec<&'a str>,
}

async fn get_entities(State(state): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult<Json<Value>> {
    let mut q = String::new();
    let mut limit = DEFAULT_ENTITY_LIMIT;
    for (key, value) in query_pairs(raw.as_deref()) {
        match key.as_str() {
            "q" => q = value,
            "limit" => {
                limit = value.parse().map_err(|_| {
                    ApiError::new(StatusCode::BAD_REQUEST, "invalid_parameter", "limit must be a count")
                        .with("parameter", "limit")
                })?
            }
            _ => {}
        }
    }
    let engine = state.engine.read();
    let hits: Vec<EntityView> = engine
        .lexicon()
        .search(&q, limit)
        .into_iter()
        .map(|e| EntityView {
            id: &e.entity_id,
            name: &e.canonical_name,
            entity_type: e.entity_type.as_str(),
            aliases: e.aliases.iter().map(String::as_str).collect(),
        })
        .collect();
    Ok(Json(json!(hits)))
}

async fn get_status(State(state): State<AppState>) -> Json<Value> {
    let engine = state.engine.read();
    Json(json!({
        "documents": engine.corpus().len(),
        "relations": engine.store().len(),
        "entities": engine.lexicon().len(),
        "persistent": engine.data_dir().is_some(),
        "alpha": state.alpha,
        "max_hops": state.max_hops,
    }))
}

async fn api_not_found() -> ApiError {
    ApiError::not_found()
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "method_not_allowed",
        "method not allowed",
    )
}

const PLACEHOLDER_INDEX: &str = "<!doctype html><title>hypotest</title>\
<p>hypotest API is running. See <code>/api/status</code>.</p>";

async fn placeholder_index() -> Html<&'static str> {
    Html(PLACEHOLDER_INDEX)
}

pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/hypothesis", post(post_hypothesis))
        .route("/api/hypothesis/graph", post(post_graph_hypothesis))
        .route("/api/corpus/documents", post(post_documents))
        .route("/api/documents/{doc_id}", get(get_document))
        .route("/api/network", get(get_network))
        .route("/api/entities", get(get_entities))
        .route("/api/status", get(get_status))
        .route("/api", any(api_not_found))
        .route("/api/{*rest}", any(api_not_found))
        .method_not_allowed_fallback(method_not_allowed)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES));
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder_index)).fallback(api_not_found),
    };
    app.with_state(state)
}

/// Builds the engine from `config` and serves until Ctrl-C.
pub async fn serve(config: ApiConfig) -> anyhow::Result<()> {
    let build = config.clone();
    let engine = tokio::task::spawn_blocking(move || build.build_engine()).await??;
    tracing::info!(
        documents = engine.corpus().len(),
        relations = engine.store().len(),
        "engine ready"
    );
    let app = router(AppState::new(engine, &config), config.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
