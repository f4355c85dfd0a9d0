//! HTTP API over a loaded dataset: graph, layout, clusters, search and bill
//! resolution. Layout is computed server-side; clients poll snapshots.

pub mod api;
pub mod config;
pub mod dataset;
pub mod state;
pub mod views;

use std::sync::Arc;
use std::time::Duration;

use axum::routing::{get, post};
use axum::Router;
use tower_http::services::ServeDir;

pub use config::{ConfigError, ServerConfig};
pub use dataset::{Dataset, DatasetError};
pub use state::{AppState, Session, StateError};
pub use views::{SessionView, MAIN_VIEW};

pub fn router(state: Arc<AppState>) -> Router {
    let mut app = Router::new()
        .route("/api/health", get(api::health))
        .route("/api/graph", get(api::graph))
        .route("/api/layout", get(api::layout))
        .route("/api/layout/tick", post(api::tick))
        .route("/api/layout/freeze", post(api::freeze))
        .route("/api/layout/unfreeze", post(api::unfreeze))
        .route("/api/node/{id}/pin", post(api::pin))
        .route("/api/node/{id}/unpin", post(api::unpin))
        .route("/api/clusters", get(api::clusters))
        .route("/api/cluster/{id}/collapse", post(api::collapse_cluster))
        .route("/api/cluster/{id}/expand", post(api::expand_cluster))
        .route("/api/neighbors/{id}", get(api::neighbors))
        .route("/api/search", get(api::search))
        .route("/api/terms", get(api::terms))
        .route("/api/bills/{bill_id}", get(api::bill))
        .route("/api/filter", post(api::filter))
        .route("/api/reload", post(api::reload));
    if let Some(dir) = state.documents_dir() {
        app = app.nest_service("/documents", ServeDir::new(dir));
    }
    if let Some(dir) = &state.config.ui_dir {
        app = app.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true));
    }
    app.with_state(state)
}

/// Starts the background layout ticker unless it is disabled.
pub fn spawn_ticker(state: Arc<AppState>) -> Option<tokio::task::JoinHandle<()>> {
    let ms = state.config.tick_interval_ms;
    if ms == 0 {
        return None;
    }
    Some(tokio::spawn(async move {
        let mut interval = tokio::time::interval(Duration::from_millis(ms));
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        loop {
            interval.tick().await;
            let st = state.clone();
            if tokio::task::spawn_blocking(move || st.tick_all()).await.is_err() {
                log::error!("layout ticker task panicked");
            }
        }
    }))
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    let ticker = spawn_ticker(state.clone());
    let result = axum::serve(listener, router(state)).await;
    if let Some(t) = ticker {
        t.abort();
    }
    result
}
