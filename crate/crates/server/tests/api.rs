use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use legiscout_core::cluster::ViewGraph;
use legiscout_core::ingest::{parse_graph_str, IngestOptions};
use legiscout_core::model::{filter_subgraph, Direction, FilterSpec};
use legiscout_core::search::{semantic_search, HashNgramEmbedder};
use legiscout_server::{router, AppState, ServerConfig, MAIN_VIEW};
use serde_json::Value;
use tower::ServiceExt;

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(bundle: Option<PathBuf>) -> ServerConfig {
    ServerConfig {
        bundle,
        tick_interval_ms: 0,
        ..ServerConfig::default()
    }
}

fn fixture_state() -> Arc<AppState> {
    Arc::new(AppState::load(config(Some(repo().join("fixtures/aca-case-study")))).unwrap())
}

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    bytes: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.bytes)))
    }
}

fn schema(name: &str) -> jsonschema::Validator {
    let text = std::fs::read_to_string(repo().join("schemas").join(format!("{name}.schema.json"))).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_schema(name: &str, v: &Value) {
    let errors: Vec<String> = schema(name).iter_errors(v).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{v}");
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<&str>) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    let reply = Reply { status, headers, bytes };
    if reply.status.is_client_error() || reply.status.is_server_error() {
        assert_schema("error", &reply.json());
    }
    reply
}

async fn get(app: &Router, uri: &str) -> Reply {
    send(app, "GET", uri, None).await
}

async fn post(app: &Router, uri: &str) -> Reply {
    send(app, "POST", uri, None).await
}

#[tokio::test]
async fn graph_revalidates_through_ingest() {
    let app = router(fixture_state());
    let r = get(&app, "/api/graph").await;
    assert_eq!(r.status, StatusCode::OK);
    let body = r.json();
    assert_schema("graph", &body);
    let text = String::from_utf8(r.bytes.clone()).unwrap();
    let (g, _) = parse_graph_str(&text, &IngestOptions::default()).expect("served graph validates");
    assert_eq!(g.entity("gao").unwrap().name, "GAO");
    assert!(body["relationships"].as_array().unwrap().iter().all(|r| r["metadata"]["line_style"].is_string()));

    let tag = r.headers.get(header::ETAG).unwrap().to_str().unwrap().to_string();
    let req = Request::get("/api/graph").header(header::IF_NONE_MATCH, &tag).body(Body::empty()).unwrap();
    assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::NOT_MODIFIED);
    assert_eq!(get(&app, "/api/graph").await.bytes, r.bytes);
}

#[tokio::test]
async fn no_dataset_is_unavailable() {
    let app = router(Arc::new(AppState::empty(config(None))));
    for uri in ["/api/graph", "/api/layout", "/api/search?q=cms", "/api/bills/SEC-1001"] {
        assert_eq!(get(&app, uri).await.status, StatusCode::SERVICE_UNAVAILABLE, "{uri}");
    }
    let h = get(&app, "/api/health").await.json();
    assert_schema("health", &h);
    assert_eq!(h["dataset_loaded"], false);
}

#[tokio::test]
async fn layout_covers_view_and_settles() {
    let app = router(fixture_state());
    assert_eq!(get(&app, "/api/layout?view=nope").await.status, StatusCode::NOT_FOUND);
    let snap = get(&app, "/api/layout").await.json();
    assert_schema("layout", &snap);
    let graph = get(&app, "/api/graph").await.json();
    let visible: BTreeSet<&str> = graph["entities"].as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    let placed: BTreeSet<&str> = snap["positions"].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(visible, placed);

    for _ in 0..10 {
        if post(&app, "/api/layout/tick?steps=500").await.json()["converged"] == true {
            break;
        }
    }
    let a = get(&app, "/api/layout").await;
    let b = get(&app, "/api/layout").await;
    assert_eq!(a.json()["converged"], true);
    assert_eq!(a.bytes, b.bytes);
    assert_eq!(post(&app, "/api/layout/tick?steps=abc").await.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn pin_holds_position() {
    let app = router(fixture_state());
    let first = post(&app, "/api/node/cms/pin").await;
    assert_eq!(first.status, StatusCode::OK);
    assert_schema("layout", &first.json());
    let again = post(&app, "/api/node/cms/pin").await;
    assert_eq!(first.bytes, again.bytes);
    let before = first.json()["positions"]["cms"].clone();
    let after = post(&app, "/api/layout/tick?steps=50").await.json();
    assert_eq!(after["positions"]["cms"], before);
    assert_ne!(after["positions"]["gao"], first.json()["positions"]["gao"]);
    assert!(after["pinned"].as_array().unwrap().contains(&Value::from("cms")));
    assert_eq!(post(&app, "/api/node/ghost/pin").await.status, StatusCode::NOT_FOUND);
    let un = post(&app, "/api/node/cms/unpin").await.json();
    assert!(un["pinned"].as_array().unwrap().is_empty());
    let frozen = post(&app, "/api/layout/freeze").await.json();
    assert_eq!(frozen["pinned"].as_array().unwrap().len(), frozen["positions"].as_object().unwrap().len());
}

#[tokio::test]
async fn collapse_expand_round_trip() {
    let app = router(fixture_state());
    let original = get(&app, "/api/graph").await.bytes;
    let c = post(&app, "/api/cluster/federal/collapse").await;
    assert_eq!(c.status, StatusCode::OK);
    let body = c.json();
    assert_schema("transition", &body);
    assert_schema("graph", &body["graph"]);
    assert_schema("layout", &body["layout"]);
    assert!(body["layout"]["positions"]["cluster:federal"].is_array());
    assert!(body["graph"]["supernodes"]["cluster:federal"].is_array());
    assert_eq!(body["layout"]["converged"], false);
    let served = get(&app, "/api/graph").await;
    parse_graph_str(std::str::from_utf8(&served.bytes).unwrap(), &IngestOptions::default()).expect("collapsed view validates");

    assert_eq!(post(&app, "/api/cluster/federal/collapse").await.status, StatusCode::CONFLICT);
    assert_eq!(post(&app, "/api/cluster/nowhere/collapse").await.status, StatusCode::NOT_FOUND);
    assert_eq!(post(&app, "/api/cluster/research/expand").await.status, StatusCode::CONFLICT);

    let e = post(&app, "/api/cluster/federal/expand").await;
    assert_eq!(e.status, StatusCode::OK);
    assert_eq!(get(&app, "/api/graph").await.bytes, original);

    let clusters = get(&app, "/api/clusters").await.json();
    assert_schema("clusters", &clusters);
    assert!(clusters["clusters"].as_array().unwrap().iter().all(|c| c["collapsed"] == false));
}

#[tokio::test]
async fn collapse_pins_supernode_of_pinned_members() {
    let app = router(fixture_state());
    post(&app, "/api/node/gao/pin").await;
    let body = post(&app, "/api/cluster/federal/collapse").await.json();
    assert!(body["layout"]["pinned"].as_array().unwrap().contains(&Value::from("cluster:federal")));
}

#[tokio::test]
async fn search_endpoints() {
    let st = fixture_state();
    let app = router(st.clone());
    let kw = get(&app, "/api/search?q=CMS&mode=keyword").await.json();
    assert_schema("search", &kw);
    assert_eq!(kw[0]["target"], "cms");
    for mode in ["keyword", "semantic"] {
        assert_eq!(get(&app, &format!("/api/search?q=&mode={mode}")).await.status, StatusCode::BAD_REQUEST);
    }
    assert_eq!(get(&app, "/api/search?q=cms&mode=fuzzy").await.status, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/search?q=cms&k=0").await.status, StatusCode::BAD_REQUEST);

    let sem = get(&app, "/api/search?q=coverage%20for%20dependents%20up%20to%20age%2026&mode=semantic&k=4").await.json();
    assert_schema("search", &sem);
    let index = st.session().unwrap().dataset.index.clone().unwrap();
    let direct = semantic_search(&index, &HashNgramEmbedder, "coverage for dependents up to age 26", 4).unwrap();
    assert_eq!(sem, serde_json::to_value(&direct).unwrap());
    assert_eq!(sem[0]["bill_ref"]["page"], 42);
    assert!(sem[0]["linked_entities"].as_array().unwrap().contains(&Value::from("dependent_coverage")));

    let terms = get(&app, "/api/terms?term=funding&k=3").await.json();
    assert_schema("terms", &terms);
    assert!(!terms.as_array().unwrap().is_empty());

    let bare = Arc::new(AppState::load(config(Some(repo().join("fixtures/synthetic-200/graph.json")))).unwrap());
    let app = router(bare);
    assert_eq!(get(&app, "/api/search?q=node&mode=semantic").await.status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(get(&app, "/api/search?q=node%201&mode=keyword").await.status, StatusCode::OK);
}

#[tokio::test]
async fn bills_resolve_and_documents_are_served() {
    let st = fixture_state();
    let app = router(st.clone());
    let b = get(&app, "/api/bills/SEC-1001").await;
    assert_eq!(b.status, StatusCode::OK);
    let b = b.json();
    assert_schema("bill", &b);
    assert!(b["uri"].as_str().unwrap().ends_with("/aca.pdf"));
    assert_eq!(b["page"], 42);
    assert_eq!(get(&app, "/api/bills/SEC-0").await.status, StatusCode::NOT_FOUND);

    let g = st.session().unwrap().dataset.base.clone();
    let refs: BTreeSet<(String, u32)> = g.entities().flat_map(|e| e.bill_refs.iter().map(|r| (r.bill_id.clone(), r.page))).collect();
    assert!(!refs.is_empty());
    for (id, page) in refs {
        let r = get(&app, &format!("/api/bills/{id}")).await;
        assert_eq!(r.status, StatusCode::OK, "{id}");
        assert_eq!(r.json()["page"], page);
    }
    let pdf = get(&app, "/documents/aca.pdf").await;
    assert_eq!(pdf.status, StatusCode::OK);
    assert!(pdf.bytes.starts_with(b"%PDF"));
}

#[tokio::test]
async fn filter_views() {
    let st = fixture_state();
    let app = router(st.clone());
    let spec = r#"{"tags": ["medicaid"]}"#;
    let a = send(&app, "POST", "/api/filter", Some(spec)).await;
    assert_eq!(a.status, StatusCode::CREATED);
    let a = a.json();
    assert_schema("filter", &a);
    let b = send(&app, "POST", "/api/filter", Some(spec)).await.json();
    assert_ne!(a["view_id"], b["view_id"]);
    let ga = get(&app, &format!("/api/graph?view={}", a["view_id"].as_str().unwrap())).await.bytes;
    let gb = get(&app, &format!("/api/graph?view={}", b["view_id"].as_str().unwrap())).await.bytes;
    assert_eq!(ga, gb);

    let base = st.session().unwrap().dataset.base.clone();
    let expected = filter_subgraph(&base, &FilterSpec::tag("medicaid"));
    let (served, _) = parse_graph_str(std::str::from_utf8(&ga).unwrap(), &IngestOptions::default()).unwrap();
    assert_eq!(served.entity_ids().collect::<Vec<_>>(), expected.entity_ids().collect::<Vec<_>>());
    let rels = |g: &legiscout_core::model::LogGraph| g.relationships().map(|r| r.id.clone()).collect::<Vec<_>>();
    assert_eq!(rels(&served), rels(&expected));

    let empty = send(&app, "POST", "/api/filter", Some(r#"{"tags": ["no-such-tag"]}"#)).await.json();
    assert_eq!(empty["entity_count"], 0);
    let view = empty["view_id"].as_str().unwrap();
    let snap = get(&app, &format!("/api/layout?view={view}")).await.json();
    assert!(snap["positions"].as_object().unwrap().is_empty());
    assert_eq!(send(&app, "POST", "/api/filter", Some(r#"{"tagz": 1}"#)).await.status, StatusCode::BAD_REQUEST);
    assert_eq!(send(&app, "POST", "/api/filter", Some("not json")).await.status, StatusCode::BAD_REQUEST);

    let collapse = post(&app, &format!("/api/cluster/medicaid/collapse?view={}", a["view_id"].as_str().unwrap())).await;
    assert_eq!(collapse.status, StatusCode::OK);
}

#[tokio::test]
async fn neighbors_match_model() {
    let st = fixture_state();
    let app = router(st.clone());
    let base = st.session().unwrap().dataset.base.clone();
    for id in ["cms", "gao", "exchanges", "pcori"] {
        let r = get(&app, &format!("/api/neighbors/{id}")).await.json();
        assert_schema("neighbors", &r);
        let want: BTreeSet<String> = base.neighbors(id, Direction::Both).unwrap().iter().map(|(e, _)| e.id.clone()).collect();
        let got: BTreeSet<String> = r["neighbors"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
        assert_eq!(got, want);
    }
    assert_eq!(get(&app, "/api/neighbors/ghost").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/neighbors/cms?direction=sideways").await.status, StatusCode::BAD_REQUEST);
}

fn state_fingerprint(st: &AppState) -> BTreeMap<String, (ViewGraph, String)> {
    let s = st.session().unwrap();
    let ids = ["main", "v1", "v2"];
    ids.iter()
        .filter_map(|id| s.peek_view(id))
        .map(|v| {
            let v = v.lock().unwrap();
            (v.id.clone(), (v.view.clone(), v.layout.to_snapshot_json()))
        })
        .collect()
}

#[tokio::test]
async fn reads_leave_state_untouched() {
    let st = fixture_state();
    let app = router(st.clone());
    send(&app, "POST", "/api/filter", Some(r#"{"tags": ["oversight"]}"#)).await;
    post(&app, "/api/cluster/research/collapse").await;
    let before = state_fingerprint(&st);
    for uri in [
        "/api/graph",
        "/api/layout",
        "/api/graph?view=v1",
        "/api/layout?view=v1",
        "/api/clusters",
        "/api/neighbors/cms",
        "/api/search?q=cms",
        "/api/search?q=premium%20credit&mode=semantic",
        "/api/terms?term=funding",
        "/api/bills/SEC-1311",
        "/api/health",
    ] {
        assert!(get(&app, uri).await.status.is_success(), "{uri}");
    }
    assert_eq!(state_fingerprint(&st), before);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_mutations_serialize() {
    let st = fixture_state();
    let app = router(st.clone());
    let mut tasks = Vec::new();
    for c in ["federal", "coverage", "research", "medicaid"] {
        let app = app.clone();
        tasks.push(tokio::spawn(async move { post(&app, &format!("/api/cluster/{c}/collapse")).await.status }));
    }
    for id in ["individuals", "providers", "qhp_issuers"] {
        let app = app.clone();
        tasks.push(tokio::spawn(async move { post(&app, &format!("/api/node/{id}/pin")).await.status }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    let s = st.session().unwrap();
    let v = s.peek_view(MAIN_VIEW).unwrap();
    let v = v.lock().unwrap();
    let all: BTreeSet<String> = ["federal", "coverage", "research", "medicaid"].map(String::from).into();
    assert_eq!(v.view.collapsed, all);
    let expected = ViewGraph::derive(s.dataset.base.clone(), &v.tree, all);
    assert_eq!(v.view, expected);
    assert!(["individuals", "providers", "qhp_issuers"].iter().all(|id| v.layout.is_pinned(id)));
    let placed: Vec<&str> = v.layout.positions.keys().map(String::as_str).collect();
    assert_eq!(placed, v.view.graph.entity_ids().collect::<Vec<_>>());
}

#[tokio::test]
async fn reload_invalidates_views() {
    let st = fixture_state();
    let app = router(st.clone());
    let made = send(&app, "POST", "/api/filter", Some("{}")).await.json();
    let view = made["view_id"].as_str().unwrap().to_string();
    assert_eq!(get(&app, &format!("/api/layout?view={view}")).await.status, StatusCode::OK);
    let r = post(&app, "/api/reload").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_schema("reload", &r.json());
    assert_eq!(get(&app, &format!("/api/layout?view={view}")).await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/layout").await.status, StatusCode::OK);

    let app = router(Arc::new(AppState::empty(config(None))));
    assert_eq!(post(&app, "/api/reload").await.status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn reload_keeps_old_dataset_on_bad_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.json");
    std::fs::copy(repo().join("fixtures/synthetic-200/graph.json"), &graph).unwrap();
    let st = Arc::new(AppState::load(config(Some(graph.clone()))).unwrap());
    let app = router(st);
    std::fs::write(&graph, r#"{"meta": {"schema": "log-v1"}, "entities": [], "relationships": [{"id": "r", "source": "a", "target": "b", "rel_type": "funding"}]}"#).unwrap();
    let r = post(&app, "/api/reload").await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(!r.json()["details"].as_array().unwrap().is_empty());
    assert_eq!(get(&app, "/api/graph").await.json()["entities"].as_array().unwrap().len(), 200);
}
