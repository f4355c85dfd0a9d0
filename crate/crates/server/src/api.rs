use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use legiscout_core::cluster::{carry_layout, collapse, expand, ClusterError, ViewGraph};
use legiscout_core::layout::{advance, LayoutError};
use legiscout_core::model::{Direction, EntityType, FilterSpec, GraphDocument, LineStyle, Shape, SizeClass, StyleHint};
use legiscout_core::search::{keyword_search, link_terms_to_graph, semantic_search, SearchError};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::state::{lock, AppState, Session, StateError};
use crate::views::{SessionView, MAIN_VIEW};

type Shared = State<Arc<AppState>>;
type Params = Query<BTreeMap<String, String>>;

const MAX_TICK_STEPS: u32 = 10_000;
const DEFAULT_K: usize = 10;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    details: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    fn no_dataset() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "no_dataset", "no dataset is loaded")
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.code, "message": self.message});
        if let Some(d) = self.details {
            body["details"] = d;
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<ClusterError> for ApiError {
    fn from(e: ClusterError) -> Self {
        let (status, code) = match e {
            ClusterError::UnknownCluster(_) => (StatusCode::NOT_FOUND, "unknown_cluster"),
            ClusterError::AlreadyCollapsed(_) => (StatusCode::CONFLICT, "already_collapsed"),
            ClusterError::NotCollapsed(_) => (StatusCode::CONFLICT, "not_collapsed"),
            ClusterError::InvalidGroupingFile(_) => (StatusCode::INTERNAL_SERVER_ERROR, "invalid_grouping"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<LayoutError> for ApiError {
    fn from(e: LayoutError) -> Self {
        match e {
            LayoutError::UnknownEntity(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_entity", e.to_string()),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "layout_error", e.to_string()),
        }
    }
}

impl From<SearchError> for ApiError {
    fn from(e: SearchError) -> Self {
        let (status, code) = match &e {
            SearchError::EmptyQuery => (StatusCode::BAD_REQUEST, "empty_query"),
            SearchError::InvalidLimit => (StatusCode::BAD_REQUEST, "invalid_limit"),
            SearchError::EmptyIndex => (StatusCode::SERVICE_UNAVAILABLE, "no_index"),
            SearchError::RemoteUnavailable(_) => (StatusCode::SERVICE_UNAVAILABLE, "embedder_unavailable"),
            SearchError::EmbedderMismatch { .. } => (StatusCode::CONFLICT, "embedder_mismatch"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "search_error"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

fn session(st: &AppState) -> Result<Arc<Session>, ApiError> {
    st.session().ok_or_else(ApiError::no_dataset)
}

fn view_id(q: &BTreeMap<String, String>) -> &str {
    q.get("view").map_or(MAIN_VIEW, String::as_str)
}

fn unknown_view(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "unknown_view", format!("unknown view `{id}`"))
}

/// Looks up a view for a mutation (refreshes its LRU position).
fn view_mut(s: &Session, q: &BTreeMap<String, String>) -> Result<Arc<Mutex<SessionView>>, ApiError> {
    let id = view_id(q);
    s.view(id).ok_or_else(|| unknown_view(id))
}

/// Looks up a view for a read, leaving all server state untouched.
fn view_ro(s: &Session, q: &BTreeMap<String, String>) -> Result<Arc<Mutex<SessionView>>, ApiError> {
    let id = view_id(q);
    s.peek_view(id).ok_or_else(|| unknown_view(id))
}

fn parse_param<T: std::str::FromStr>(q: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, ApiError> {
    match q.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| ApiError::bad_request(format!("query parameter `{key}` has invalid value {v:?}"))),
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], body).into_response()
}

pub fn default_style(t: EntityType) -> StyleHint {
    let shape = match t {
        EntityType::FederalAgency | EntityType::StateAgency | EntityType::Regulator => Shape::Square,
        _ => Shape::Circle,
    };
    StyleHint {
        shape,
        size_class: SizeClass::Medium,
        color_class: t.as_str().to_string(),
        line_style: None,
    }
}

fn line_style_name(s: LineStyle) -> &'static str {
    match s {
        LineStyle::Solid => "solid",
        LineStyle::Dashed => "dashed",
        LineStyle::Dotted => "dotted",
    }
}

/// The view as served: entities without a style hint get a type default
/// and every relationship names its line style in `metadata.line_style`.
pub fn styled_document(view: &ViewGraph) -> GraphDocument {
    let mut doc = view.to_document();
    for e in &mut doc.entities {
        if e.style_hint.is_none() {
            e.style_hint = Some(default_style(e.entity_type));
        }
    }
    for r in &mut doc.relationships {
        let style = line_style_name(r.line_style());
        r.metadata.entry("line_style".into()).or_insert_with(|| style.into());
    }
    doc
}

fn etag(body: &[u8]) -> String {
    let digest = Sha256::digest(body);
    let hex: String = digest.iter().take(16).map(|b| format!("{b:02x}")).collect();
    format!("\"{hex}\"")
}

pub async fn graph(State(st): Shared, Query(q): Params, headers: HeaderMap) -> Result<Response, ApiError> {
    let s = session(&st)?;
    let v = view_ro(&s, &q)?;
    let body = serde_json::to_string(&styled_document(&lock(&v).view)).expect("documents serialize");
    let tag = etag(body.as_bytes());
    let matches = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|h| h.to_str().ok())
        .is_some_and(|h| h.split(',').any(|t| t.trim() == tag));
    let tag_value = HeaderValue::from_str(&tag).expect("etag is ascii");
    if matches {
        return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, tag_value)]).into_response());
    }
    let mut resp = json_response(StatusCode::OK, body);
    resp.headers_mut().insert(header::ETAG, tag_value);
    Ok(resp)
}

pub async fn layout(State(st): Shared, Query(q): Params) -> Result<Response, ApiError> {
    let s = session(&st)?;
    let v = view_ro(&s, &q)?;
    let body = lock(&v).layout.to_snapshot_json();
    Ok(json_response(StatusCode::OK, body))
}

pub async fn tick(State(st): Shared, Query(q): Params) -> Result<Response, ApiError> {
    let s = session(&st)?;
    let steps: u32 = parse_param(&q, "steps", st.config.steps_per_tick)?;
    if steps > MAX_TICK_STEPS {
        return Err(ApiError::bad_request(format!("at most {MAX_TICK_STEPS} steps per request")));
    }
    let v = view_mut(&s, &q)?;
    let body = tokio::task::spawn_blocking(move || {
        let mut guard = lock(&v);
        let SessionView { view, layout, .. } = &mut *guard;
        advance(&view.graph, layout, &s.params, steps).map(|_| layout.to_snapshot_json())
    })
    .await
    .expect("layout task panicked")?;
    Ok(json_response(StatusCode::OK, body))
}

async fn with_layout(
    st: Arc<AppState>,
    q: BTreeMap<String, String>,
    f: impl FnOnce(&mut SessionView) -> Result<(), LayoutError>,
) -> Result<Response, ApiError> {
    let s = session(&st)?;
    let v = view_mut(&s, &q)?;
    let mut guard = lock(&v);
    f(&mut guard)?;
    Ok(json_response(StatusCode::OK, guard.layout.to_snapshot_json()))
}

pub async fn pin(State(st): Shared, Path(id): Path<String>, Query(q): Params) -> Result<Response, ApiError> {
    with_layout(st, q, |v| v.layout.pin(&id)).await
}

pub async fn unpin(State(st): Shared, Path(id): Path<String>, Query(q): Params) -> Result<Response, ApiError> {
    with_layout(st, q, |v| v.layout.unpin(&id)).await
}

pub async fn freeze(State(st): Shared, Query(q): Params) -> Result<Response, ApiError> {
    with_layout(st, q, |v| {
        v.layout.freeze_all();
        Ok(())
    })
    .await
}

pub async fn unfreeze(State(st): Shared, Query(q): Params) -> Result<Response, ApiError> {
    with_layout(st, q, |v| {
        v.layout.pinned.clear();
        Ok(())
    })
    .await
}

#[derive(Serialize)]
struct Transition {
    view_id: String,
    graph: GraphDocument,
    layout: Value,
}

fn transition(st: &AppState, q: &BTreeMap<String, String>, cluster_id: &str, collapsing: bool) -> Result<Response, ApiError> {
    let s = session(st)?;
    let v = view_mut(&s, q)?;
    let mut guard = lock(&v);
    let next = if collapsing {
        collapse(&guard.view, &guard.tree, cluster_id)?
    } else {
        expand(&guard.view, &guard.tree, cluster_id)?
    };
    let SessionView { view, layout, .. } = &mut *guard;
    carry_layout(view, &next, layout, &s.params);
    layout.reheat(&s.params);
    *view = next;
    let body = Transition {
        view_id: guard.id.clone(),
        graph: styled_document(&guard.view),
        layout: serde_json::to_value(guard.layout.snapshot()).expect("snapshot serializes"),
    };
    Ok(Json(body).into_response())
}

pub async fn collapse_cluster(State(st): Shared, Path(id): Path<String>, Query(q): Params) -> Result<Response, ApiError> {
    transition(&st, &q, &id, true)
}

pub async fn expand_cluster(State(st): Shared, Path(id): Path<String>, Query(q): Params) -> Result<Response, ApiError> {
    transition(&st, &q, &id, false)
}

pub async fn clusters(State(st): Shared, Query(q): Params) -> Result<Response, ApiError> {
    let s = session(&st)?;
    let v = view_ro(&s, &q)?;
    let guard = lock(&v);
    let nodes: Vec<Value> = guard
        .tree
        .nodes
        .values()
        .map(|n| {
            json!({
                "cluster_id": n.cluster_id,
                "label": n.label,
                "parent": n.parent,
                "clusters": n.clusters,
                "members": n.members,
                "supernode_id": n.supernode_id(),
                "collapsed": guard.view.is_collapsed(&n.cluster_id),
            })
        })
        .collect();
    Ok(Json(json!({"view_id": guard.id, "roots": guard.tree.roots, "clusters": nodes})).into_response())
}

pub async fn neighbors(State(st): Shared, Path(id): Path<String>, Query(q): Params) -> Result<Response, ApiError> {
    let s = session(&st)?;
    let direction = match q.get("direction").map(String::as_str) {
        None | Some("both") => Direction::Both,
        Some("in") => Direction::In,
        Some("out") => Direction::Out,
        Some(other) => return Err(ApiError::bad_request(format!("direction must be in, out or both, not {other:?}"))),
    };
    let v = view_ro(&s, &q)?;
    let guard = lock(&v);
    let found = guard
        .view
        .graph
        .neighbors(&id, direction)
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, "unknown_entity", e.to_string()))?;
    let entities: BTreeSet<&str> = found.iter().map(|(e, _)| e.id.as_str()).collect();
    let relationships: BTreeSet<&str> = found.iter().map(|(_, r)| r.id.as_str()).collect();
    Ok(Json(json!({"id": id, "direction": direction, "neighbors": entities, "relationships": relationships})).into_response())
}

pub async fn search(State(st): Shared, Query(q): Params) -> Result<Response, ApiError> {
    let s = session(&st)?;
    let query = q.get("q").cloned().unwrap_or_default();
    if query.trim().is_empty() {
        return Err(SearchError::EmptyQuery.into());
    }
    let k: usize = parse_param(&q, "k", DEFAULT_K)?;
    let mode = q.get("mode").map_or("keyword", String::as_str).to_string();
    let v = view_ro(&s, &q)?;
    let hits = match mode.as_str() {
        "keyword" => keyword_search(&lock(&v).view.graph, &query, k)?,
        "semantic" => {
            let index = s.dataset.index.clone().ok_or_else(|| {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_index", "no search index is built for this dataset")
            })?;
            let embedder = s.dataset.embedder.clone();
            tokio::task::spawn_blocking(move || semantic_search(&index, embedder.as_ref(), &query, k))
                .await
                .expect("search task panicked")?
        }
        other => return Err(ApiError::bad_request(format!("mode must be keyword or semantic, not {other:?}"))),
    };
    Ok(Json(hits).into_response())
}

pub async fn terms(State(st): Shared, Query(q): Params) -> Result<Response, ApiError> {
    let s = session(&st)?;
    let term = q.get("term").cloned().unwrap_or_default();
    if term.trim().is_empty() {
        return Err(SearchError::EmptyQuery.into());
    }
    let k: usize = parse_param(&q, "k", DEFAULT_K)?;
    let index = s
        .dataset
        .index
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_index", "no search index is built for this dataset"))?;
    let v = view_ro(&s, &q)?;
    let embedder = s.dataset.embedder.clone();
    let links = tokio::task::spawn_blocking(move || {
        let guard = lock(&v);
        link_terms_to_graph(&guard.view.graph, &index, embedder.as_ref(), &term, k)
    })
    .await
    .expect("search task panicked")?;
    Ok(Json(links).into_response())
}

pub async fn bill(State(st): Shared, Path(bill_id): Path<String>) -> Result<Response, ApiError> {
    let s = session(&st)?;
    let b = s
        .dataset
        .resolve_bill(&bill_id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_bill", format!("unknown bill `{bill_id}`")))?;
    Ok(Json(b).into_response())
}

pub async fn filter(State(st): Shared, body: Bytes) -> Result<Response, ApiError> {
    let s = session(&st)?;
    let spec: FilterSpec = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("malformed filter spec: {e}")))?;
    let v = s.create_filtered_view(spec)?;
    let guard = lock(&v);
    let body = json!({
        "view_id": guard.id,
        "entity_count": guard.view.graph.entity_count(),
        "relationship_count": guard.view.graph.relationship_count(),
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

pub async fn reload(State(st): Shared) -> Result<Response, ApiError> {
    let st2 = st.clone();
    let result = tokio::task::spawn_blocking(move || st2.reload()).await.expect("reload task panicked");
    match result {
        Ok(s) => Ok(Json(json!({
            "status": "reloaded",
            "entity_count": s.dataset.base.entity_count(),
            "relationship_count": s.dataset.base.relationship_count(),
        }))
        .into_response()),
        Err(StateError::NoBundle) => Err(ApiError::new(StatusCode::CONFLICT, "no_bundle", "no dataset bundle is configured")),
        Err(StateError::Dataset(e)) if !e.is_environmental() => {
            let violations = match &e {
                crate::dataset::DatasetError::Ingest(i) => serde_json::to_value(i.violations()).ok(),
                _ => None,
            };
            let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_dataset", e.to_string());
            err.details = violations;
            Err(err)
        }
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "reload_failed", e.to_string())),
    }
}

pub async fn health(State(st): Shared) -> Response {
    let s = st.session();
    let views = s.as_ref().map_or(0, |s| lock(&s.views).len());
    Json(json!({"status": "ok", "dataset_loaded": s.is_some(), "views": views})).into_response()
}
