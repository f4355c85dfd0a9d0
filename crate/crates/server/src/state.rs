use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use legiscout_core::cluster::ViewGraph;
use legiscout_core::layout::{advance, init_layout, LayoutError, LayoutParams};
use legiscout_core::model::{filter_subgraph, FilterSpec};

use crate::config::ServerConfig;
use crate::dataset::{Dataset, DatasetError};
use crate::views::{SessionView, ViewStore, MAIN_VIEW};

pub(crate) fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// A loaded dataset and the views over it. Replaced wholesale on reload.
pub struct Session {
    pub dataset: Arc<Dataset>,
    pub views: Mutex<ViewStore>,
    pub params: LayoutParams,
}

impl Session {
    fn new(dataset: Dataset, config: &ServerConfig) -> Result<Self, LayoutError> {
        let view = ViewGraph::new(dataset.base.clone());
        let layout = init_layout(&view.graph, &config.layout)?;
        let main = SessionView {
            id: MAIN_VIEW.into(),
            view,
            layout,
            filter: None,
            tree: dataset.tree.clone(),
        };
        let mut views = ViewStore::new(config.max_views);
        views.insert(main);
        Ok(Session {
            dataset: Arc::new(dataset),
            views: Mutex::new(views),
            params: config.layout,
        })
    }

    pub fn view(&self, id: &str) -> Option<Arc<Mutex<SessionView>>> {
        lock(&self.views).get(id)
    }

    /// Read-only lookup that leaves LRU order untouched.
    pub fn peek_view(&self, id: &str) -> Option<Arc<Mutex<SessionView>>> {
        lock(&self.views).peek(id)
    }

    /// New view over the filtered base graph, with a fresh layout.
    pub fn create_filtered_view(&self, spec: FilterSpec) -> Result<Arc<Mutex<SessionView>>, LayoutError> {
        let g = filter_subgraph(&self.dataset.base, &spec);
        let tree = self
            .dataset
            .tree_for(&g)
            .expect("grouping restricted to a subgraph stays valid");
        let layout = init_layout(&g, &self.params)?;
        let mut views = lock(&self.views);
        let id = views.fresh_id();
        Ok(views.insert(SessionView {
            id,
            view: ViewGraph::new(g),
            layout,
            filter: Some(spec),
            tree: Arc::new(tree),
        }))
    }
}

/// Shared server state.
pub struct AppState {
    pub config: ServerConfig,
    current: RwLock<Option<Arc<Session>>>,
}

impl AppState {
    /// State with no dataset; data endpoints answer 503 until a reload.
    pub fn empty(config: ServerConfig) -> Self {
        AppState {
            config,
            current: RwLock::new(None),
        }
    }

    pub fn with_dataset(config: ServerConfig, dataset: Dataset) -> Result<Self, LayoutError> {
        config.layout.validate()?;
        let session = Session::new(dataset, &config)?;
        Ok(AppState {
            config,
            current: RwLock::new(Some(Arc::new(session))),
        })
    }

    /// Loads the configured bundle, if any.
    pub fn load(config: ServerConfig) -> Result<Self, StateError> {
        config.layout.validate()?;
        match config.bundle.clone() {
            None => Ok(Self::empty(config)),
            Some(path) => {
                let dataset = Dataset::load(&path, &config)?;
                Ok(Self::with_dataset(config, dataset)?)
            }
        }
    }

    pub fn session(&self) -> Option<Arc<Session>> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Reloads the bundle from disk. All views are dropped; on failure the
    /// previous dataset stays in service.
    pub fn reload(&self) -> Result<Arc<Session>, StateError> {
        let path: PathBuf = self.config.bundle.clone().ok_or(StateError::NoBundle)?;
        let mut current = self.current.write().unwrap_or_else(|e| e.into_inner());
        let dataset = Dataset::load(&path, &self.config)?;
        let session = Arc::new(Session::new(dataset, &self.config)?);
        *current = Some(session.clone());
        Ok(session)
    }

    pub fn documents_dir(&self) -> Option<PathBuf> {
        self.config
            .documents_dir
            .clone()
            .or_else(|| self.session().and_then(|s| s.dataset.documents_dir.clone()))
    }

    /// Advances every unconverged view by the configured step count.
    pub fn tick_all(&self) {
        let Some(session) = self.session() else { return };
        let views = lock(&session.views).all();
        for v in views {
            let mut v = lock(&v);
            if v.layout.converged {
                continue;
            }
            let SessionView { view, layout, .. } = &mut *v;
            if let Err(e) = advance(&view.graph, layout, &session.params, self.config.steps_per_tick) {
                log::error!("layout tick failed: {e}");
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StateError {
    #[error("no dataset bundle is configured")]
    NoBundle,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}
