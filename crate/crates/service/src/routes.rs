use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pdfsift_core::analytics::facets::filter_records;
use pdfsift_core::analytics::{
    cluster_documents, group_centroid_terms, page_count_bucket, ClusterParams, DEFAULT_MAX_ITER, PAGE_BUCKETS,
};
use pdfsift_core::learner::{Label, LabelSession, RankedPage, Rollup};
use pdfsift_core::text::{keyword_search, SparseVector};
use pdfsift_core::visual::features::find_raster;
use pdfsift_core::{DocumentId, DocumentRecord, PageRef};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::trace::TraceLayer;

use crate::error::ApiError;
use crate::state::{AppState, Corpus, SharedSession, TextIndex};

type AppResult = Result<Response, ApiError>;
type Shared = State<Arc<AppState>>;

const DEFAULT_LIMIT: usize = 50;
const MAX_DOCUMENT_PAGE: usize = 1_000;
const MAX_RANKING: usize = 10_000;
const MAX_TOP_K: usize = 1_000;

pub fn router(state: Arc<AppState>) -> Router {
    let cors = cors_layer(&state.options.allowed_origins);
    Router::new()
        .route("/api/health", get(health))
        .route("/api/summary", get(summary))
        .route("/api/documents", get(documents))
        .route("/api/documents/{doc_id}", get(document))
        .route("/api/facets/{facet}", get(facet))
        .route("/api/search", get(search))
        .route("/api/terms", get(terms))
        .route("/api/cluster", post(cluster))
        .route("/api/projection", get(projection))
        .route("/api/sessions", post(new_session))
        .route("/api/sessions/{id}", get(session_detail))
        .route("/api/sessions/{id}/labels", post(label))
        .route("/api/sessions/{id}/train", post(train))
        .route("/api/sessions/{id}/ranking", get(ranking))
        .route("/api/pages/{doc_id}/{page_index}/thumbnail", get(thumbnail))
        .fallback(|| async { ApiError::not_found("no such route") })
        .method_not_allowed_fallback(|| async { ApiError::bad_request("method not allowed on this route") })
        .layer(cors)
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

fn cors_layer(origins: &[String]) -> CorsLayer {
    let allow = if origins.is_empty() {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| match HeaderValue::from_str(o) {
            Ok(v) => Some(v),
            Err(_) => {
                tracing::warn!("ignoring invalid CORS origin {o:?}");
                None
            }
        }))
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE])
}

fn json_bytes(body: Bytes) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn ok<T: Serialize>(value: T) -> AppResult {
    Ok(Json(value).into_response())
}

fn parse_doc(corpus: &Corpus, raw: &str) -> Result<DocumentId, ApiError> {
    raw.parse::<DocumentId>()
        .ok()
        .filter(|id| corpus.manifest.get(id).is_some())
        .ok_or_else(|| ApiError::unknown_document(raw))
}

fn text_index(corpus: &Corpus) -> Result<&TextIndex, ApiError> {
    corpus.text.as_ref().ok_or_else(|| ApiError::not_found("no text features were loaded"))
}

fn check_bucket(bucket: Option<&str>) -> Result<(), ApiError> {
    match bucket {
        Some(b) if !PAGE_BUCKETS.contains(&b) => {
            Err(ApiError::invalid_parameter(format!("bucket must be one of {}", PAGE_BUCKETS.join(", "))))
        }
        _ => Ok(()),
    }
}

fn bounded(name: &str, value: Option<usize>, default: usize, max: usize) -> Result<usize, ApiError> {
    let v = value.unwrap_or(default);
    if v > max {
        return Err(ApiError::invalid_parameter(format!("{name} must be at most {max}")));
    }
    Ok(v)
}

async fn health(State(s): Shared) -> AppResult {
    ok(json!({
        "status": "ok",
        "corpus_id": s.corpus.manifest.corpus_id(),
        "documents": s.corpus.manifest.len(),
    }))
}

async fn summary(State(s): Shared) -> Response {
    json_bytes(s.precomputed.summary.clone())
}

#[derive(Deserialize)]
struct DocumentsQuery {
    base_url: Option<String>,
    bucket: Option<String>,
    offset: Option<usize>,
    limit: Option<usize>,
}

#[derive(Serialize)]
struct DocumentView<'a> {
    #[serde(flatten)]
    record: &'a DocumentRecord,
    ordinal: usize,
    page_bucket: &'static str,
}

impl<'a> DocumentView<'a> {
    fn new(ordinal: usize, record: &'a DocumentRecord) -> Self {
        DocumentView { record, ordinal, page_bucket: page_count_bucket(record.page_count) }
    }
}

async fn documents(State(s): Shared, q: Result<Query<DocumentsQuery>, QueryRejection>) -> AppResult {
    let Query(q) = q?;
    check_bucket(q.bucket.as_deref())?;
    let limit = bounded("limit", q.limit, DEFAULT_LIMIT, MAX_DOCUMENT_PAGE)?;
    let offset = q.offset.unwrap_or(0);
    let records = s.corpus.manifest.records();
    let matches: Vec<(usize, &DocumentRecord)> =
        filter_records(records, q.base_url.as_deref(), q.bucket.as_deref()).collect();
    let page: Vec<DocumentView> =
        matches.iter().skip(offset).take(limit).map(|&(i, r)| DocumentView::new(i, r)).collect();
    ok(json!({ "total": matches.len(), "offset": offset, "limit": limit, "documents": page }))
}

async fn document(State(s): Shared, id: Result<Path<String>, PathRejection>) -> AppResult {
    let Path(raw) = id?;
    let id = parse_doc(&s.corpus, &raw)?;
    let ordinal = s.corpus.manifest.ordinal(&id).expect("checked above");
    let record = &s.corpus.manifest.records()[ordinal];
    let embedded_pages = s.corpus.store.as_ref().map(|st| st.pages_of(&id)).unwrap_or_default();
    let has_text = s.corpus.text.as_ref().is_some_and(|t| t.artifacts.ids.contains(&id));
    ok(json!({
        "document": DocumentView::new(ordinal, record),
        "embedded_pages": embedded_pages,
        "has_text": has_text,
    }))
}

async fn facet(State(s): Shared, name: Result<Path<String>, PathRejection>) -> AppResult {
    let Path(name) = name?;
    match name.as_str() {
        "base_url" => Ok(json_bytes(s.precomputed.base_url_facet.clone())),
        "page_count" | "page_count_bucket" => Ok(json_bytes(s.precomputed.page_count_facet.clone())),
        other => Err(ApiError::not_found(format!("unknown facet {other:?}; try base_url or page_count"))),
    }
}

#[derive(Deserialize)]
struct SearchQuery {
    q: Option<String>,
    limit: Option<usize>,
}

async fn search(State(s): Shared, q: Result<Query<SearchQuery>, QueryRejection>) -> AppResult {
    let Query(q) = q?;
    let query =
        q.q.filter(|t| !t.trim().is_empty()).ok_or_else(|| ApiError::bad_request("missing query parameter q"))?;
    let limit = bounded("limit", q.limit, DEFAULT_LIMIT, MAX_DOCUMENT_PAGE)?;
    let text = text_index(&s.corpus)?;
    let hits: Vec<_> = keyword_search(&text.index, &text.artifacts.vocab, &query, limit)
        .into_iter()
        .map(|h| {
            let id = &text.artifacts.ids[h.ordinal];
            let base_url = s.corpus.manifest.get(id).map(|r| r.base_url.as_str());
            json!({ "doc_id": id, "base_url": base_url, "score": h.score })
        })
        .collect();
    ok(json!({ "query": query, "hits": hits }))
}

#[derive(Deserialize)]
struct TermsQuery {
    base_url: Option<String>,
    top_k: Option<usize>,
    prune: Option<bool>,
}

async fn terms(State(s): Shared, q: Result<Query<TermsQuery>, QueryRejection>) -> AppResult {
    let Query(q) = q?;
    let top_k = bounded("top_k", q.top_k, 10, MAX_TOP_K)?;
    let prune = q.prune.unwrap_or(false);
    text_index(&s.corpus)?;
    let report = tokio::task::spawn_blocking(move || {
        let text = s.corpus.text.as_ref().expect("checked above");
        let group: Vec<&SparseVector> = text
            .artifacts
            .select(|id| {
                q.base_url.as_ref().is_none_or(|b| s.corpus.manifest.get(id).is_some_and(|r| &r.base_url == b))
            })
            .into_iter()
            .map(|i| &text.artifacts.vectors[i])
            .collect();
        let key = q.base_url.as_deref().unwrap_or("all");
        group_centroid_terms(key, &group, &text.artifacts.vocab, top_k, prune)
    })
    .await??;
    ok(report)
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FacetFilter {
    base_url: Option<String>,
    bucket: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterRequest {
    #[serde(default)]
    facet_filter: FacetFilter,
    k: usize,
    #[serde(default)]
    seed: u64,
    max_iter: Option<usize>,
    top_terms: Option<usize>,
    #[serde(default)]
    prune: bool,
}

async fn cluster(State(s): Shared, body: Result<Json<ClusterRequest>, JsonRejection>) -> AppResult {
    let Json(req) = body?;
    check_bucket(req.facet_filter.bucket.as_deref())?;
    let params = ClusterParams {
        k: req.k,
        seed: req.seed,
        max_iter: bounded("max_iter", req.max_iter, DEFAULT_MAX_ITER, 10_000)?,
        top_terms: bounded("top_terms", req.top_terms, 10, MAX_TOP_K)?,
        prune: req.prune,
    };
    let text = text_index(&s.corpus)?;
    let filter = &req.facet_filter;
    let rows = text.artifacts.select(|id| {
        s.corpus.manifest.get(id).is_some_and(|r| {
            filter.base_url.as_ref().is_none_or(|b| &r.base_url == b)
                && filter.bucket.as_deref().is_none_or(|b| page_count_bucket(r.page_count) == b)
        })
    });
    let cap = s.options.cluster_row_cap;
    if rows.len() > cap {
        return Err(ApiError::too_large(format!(
            "{} documents match; on-line clustering is capped at {cap}, use the cluster command instead",
            rows.len()
        )));
    }
    if rows.is_empty() {
        return Err(ApiError::not_found("no documents match the filter"));
    }
    let report = tokio::task::spawn_blocking(move || {
        let text = s.corpus.text.as_ref().expect("checked above");
        let ids: Vec<DocumentId> = rows.iter().map(|&i| text.artifacts.ids[i].clone()).collect();
        let vectors: Vec<&SparseVector> = rows.iter().map(|&i| &text.artifacts.vectors[i]).collect();
        cluster_documents(&ids, &vectors, &text.artifacts.vocab, &params).map(|(_, report)| report)
    })
    .await??;
    ok(report)
}

async fn projection(State(s): Shared) -> AppResult {
    s.precomputed
        .projection
        .clone()
        .map(json_bytes)
        .ok_or_else(|| ApiError::not_found("no projection artifact was loaded"))
}

#[derive(Serialize)]
struct SessionStatus<'a> {
    session_id: &'a str,
    created_at: &'a str,
    updated_at: &'a str,
    positives: usize,
    negatives: usize,
    trained: bool,
}

impl<'a> SessionStatus<'a> {
    fn of(session: &'a LabelSession) -> Self {
        let (positives, negatives) = session.counts();
        SessionStatus {
            session_id: &session.session_id,
            created_at: &session.created_at,
            updated_at: &session.updated_at,
            positives,
            negatives,
            trained: session.model.is_some(),
        }
    }
}

fn lookup_session(s: &AppState, id: &str) -> Result<SharedSession, ApiError> {
    s.session(id).ok_or_else(|| ApiError::unknown_session(id))
}

fn persist(s: &AppState, session: &LabelSession) -> Result<(), ApiError> {
    s.persist(session).map_err(|e| ApiError::internal(format!("cannot save session snapshot: {e}")))
}

async fn new_session(State(s): Shared) -> AppResult {
    let session = s.create_session();
    persist(&s, &session)?;
    Ok((StatusCode::CREATED, Json(SessionStatus::of(&session))).into_response())
}

async fn session_detail(State(s): Shared, id: Result<Path<String>, PathRejection>) -> AppResult {
    let Path(id) = id?;
    let session = lookup_session(&s, &id)?;
    let guard = session.lock().await;
    ok(guard.snapshot())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRequest {
    doc_id: String,
    page_index: u32,
    /// `null` clears an existing label.
    label: Option<Label>,
}

async fn label(
    State(s): Shared,
    id: Result<Path<String>, PathRejection>,
    body: Result<Json<LabelRequest>, JsonRejection>,
) -> AppResult {
    let Path(id) = id?;
    let session = lookup_session(&s, &id)?;
    let Json(req) = body?;
    let doc = parse_doc(&s.corpus, &req.doc_id)?;
    let store = s.corpus.store.as_ref().ok_or_else(|| ApiError::not_found("no embedding store was loaded"))?;
    let page = PageRef::new(doc, req.page_index);
    let mut guard = session.lock().await;
    match req.label {
        Some(l) => guard.add_label(store, page, l)?,
        None => {
            guard.remove_label(&page);
        }
    }
    persist(&s, &guard)?;
    ok(SessionStatus::of(&guard))
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRequest {
    l2_lambda: Option<f64>,
}

async fn train(State(s): Shared, id: Result<Path<String>, PathRejection>, body: Bytes) -> AppResult {
    let Path(id) = id?;
    let session = lookup_session(&s, &id)?;
    let req: TrainRequest = if body.iter().all(u8::is_ascii_whitespace) {
        TrainRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid train request: {e}")))?
    };
    let lambda = req.l2_lambda.unwrap_or(s.options.l2_lambda);
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(ApiError::invalid_parameter("l2_lambda must be finite and non-negative"));
    }
    if s.corpus.store.is_none() {
        return Err(ApiError::not_found("no embedding store was loaded"));
    }
    // The owned guard keeps the session locked for the whole fit.
    let guard = session.lock_owned().await;
    let body = tokio::task::spawn_blocking(move || {
        let mut guard = guard;
        let store = s.corpus.store.as_ref().expect("checked above");
        let model = guard.train(store, lambda)?.clone();
        persist(&s, &guard)?;
        let status = SessionStatus::of(&guard);
        Ok::<_, ApiError>(json!({
            "session": status,
            "steps": model.steps,
            "final_loss": model.final_loss,
            "gradient_norm": model.gradient_norm,
            "l2_lambda": lambda,
        }))
    })
    .await??;
    ok(body)
}

#[derive(Deserialize)]
struct RankingQuery {
    limit: Option<usize>,
    exclude_labeled: Option<bool>,
    rollup: Option<Rollup>,
}

#[derive(Serialize)]
struct RankedEntry<'a> {
    #[serde(flatten)]
    entry: &'a RankedPage,
    base_url: Option<&'a str>,
    label: Option<Label>,
}

async fn ranking(
    State(s): Shared,
    id: Result<Path<String>, PathRejection>,
    q: Result<Query<RankingQuery>, QueryRejection>,
) -> AppResult {
    let Path(id) = id?;
    let Query(q) = q?;
    let session = lookup_session(&s, &id)?;
    let limit = bounded("limit", q.limit, DEFAULT_LIMIT, MAX_RANKING)?;
    let exclude = q.exclude_labeled.unwrap_or(true);
    let rollup = q.rollup.unwrap_or_default();
    if s.corpus.store.is_none() {
        return Err(ApiError::not_found("no embedding store was loaded"));
    }
    let guard = session.lock_owned().await;
    let body = tokio::task::spawn_blocking(move || {
        let store = s.corpus.store.as_ref().expect("checked above");
        let ranking = guard.rank(store, limit, exclude, rollup)?;
        let entries: Vec<RankedEntry> = ranking
            .entries
            .iter()
            .map(|e| RankedEntry {
                entry: e,
                base_url: s.corpus.manifest.get(&e.page.doc_id).map(|r| r.base_url.as_str()),
                label: guard.labels.get(&e.page).copied(),
            })
            .collect();
        Ok::<_, ApiError>(json!({
            "session_id": guard.session_id,
            "rollup": rollup,
            "excluded_labeled": ranking.excluded_labeled,
            "entries": entries,
        }))
    })
    .await??;
    ok(body)
}

async fn thumbnail(State(s): Shared, path: Result<Path<(String, String)>, PathRejection>) -> AppResult {
    let Path((raw_doc, raw_page)) = path?;
    let doc = parse_doc(&s.corpus, &raw_doc)?;
    let page_index: u32 = raw_page
        .parse()
        .map_err(|_| ApiError::invalid_parameter(format!("page index {raw_page:?} is not a number")))?;
    let page = PageRef::new(doc, page_index);
    let dir = s.corpus.rasters.as_ref().ok_or_else(|| ApiError::not_found("no page rasters are configured"))?;
    let path = find_raster(dir, &page).ok_or_else(|| ApiError::not_found(format!("no raster for page {page}")))?;
    let bytes = tokio::fs::read(&path).await.map_err(|e| ApiError::internal(format!("cannot read raster: {e}")))?;
    let content_type = match path.extension().and_then(|e| e.to_str()) {
        Some("png") => "image/png",
        _ => "image/jpeg",
    };
    Ok(([(header::CONTENT_TYPE, content_type), (header::CACHE_CONTROL, "public, max-age=86400")], bytes)
        .into_response())
}
