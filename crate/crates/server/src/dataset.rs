use std::path::{Path, PathBuf};
use std::sync::Arc;

use legiscout_core::cluster::{build_cluster_tree, parse_grouping_file, ClusterError, ClusterStrategy, ClusterTree, GroupingFile};
use legiscout_core::ingest::{load_dataset, DatasetBundle, IngestError, IngestOptions, LoadedDataset, ResolvedBill};
use legiscout_core::model::LogGraph;
use legiscout_core::search::{
    build_index, chunk_corpus, ChunkIndex, Embedder, HashNgramEmbedder, RemoteEmbedder, RemoteOptions, SearchError,
    HASH_NGRAM_ID,
};
use thiserror::Error;

use crate::config::ServerConfig;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("bill ids do not resolve to a registered document: {0:?}")]
    UnresolvedBills(Vec<String>),
    #[error("cannot read grouping file {path}: {message}")]
    Grouping { path: PathBuf, message: String },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("unknown embedder `{0}` (expected `hash-ngram-v1` or an http(s) URL)")]
    UnknownEmbedder(String),
}

impl DatasetError {
    /// True for problems with the environment rather than with the data.
    pub fn is_environmental(&self) -> bool {
        match self {
            DatasetError::Ingest(e) => e.is_io(),
            DatasetError::Grouping { .. } => true,
            DatasetError::Search(SearchError::RemoteUnavailable(_)) => true,
            _ => false,
        }
    }
}

pub fn make_embedder(spec: &str) -> Result<Arc<dyn Embedder>, DatasetError> {
    if spec == HASH_NGRAM_ID {
        Ok(Arc::new(HashNgramEmbedder))
    } else if spec.starts_with("http://") || spec.starts_with("https://") {
        Ok(Arc::new(RemoteEmbedder::connect(spec, RemoteOptions::default())?))
    } else {
        Err(DatasetError::UnknownEmbedder(spec.to_string()))
    }
}

/// A validated bundle with everything the endpoints derive from it.
pub struct Dataset {
    pub loaded: LoadedDataset,
    pub base: Arc<LogGraph>,
    strategy: ClusterStrategy,
    pub tree: Arc<ClusterTree>,
    /// `None` when the bundle has no corpus.
    pub index: Option<Arc<ChunkIndex>>,
    pub embedder: Arc<dyn Embedder>,
    pub documents_dir: Option<PathBuf>,
}

/// Keeps only members present in `g`, then drops groups left with neither
/// members nor children.
fn restrict_groups(groups: &GroupingFile, g: &LogGraph) -> GroupingFile {
    let mut out: GroupingFile = groups
        .iter()
        .map(|(id, s)| {
            let mut s = s.clone();
            s.members.retain(|m| g.contains_entity(m));
            (id.clone(), s)
        })
        .collect();
    loop {
        let parents: std::collections::BTreeSet<String> = out.values().filter_map(|s| s.parent.clone()).collect();
        let empty: Vec<String> = out
            .iter()
            .filter(|(id, s)| s.members.is_empty() && !parents.contains(*id))
            .map(|(id, _)| id.clone())
            .collect();
        if empty.is_empty() {
            return out;
        }
        for id in empty {
            out.remove(&id);
        }
    }
}

impl Dataset {
    pub fn load(bundle_path: &Path, config: &ServerConfig) -> Result<Self, DatasetError> {
        let bundle = DatasetBundle::open(bundle_path)?;
        let options = IngestOptions {
            lenient: config.lenient,
            section_pattern: None,
        };
        let loaded = load_dataset(&bundle, &options)?;
        for w in &loaded.report.warnings {
            log::warn!("{w}");
        }
        let unresolved = loaded.unresolved_bills();
        if !unresolved.is_empty() {
            return Err(DatasetError::UnresolvedBills(unresolved));
        }
        let strategy = match (&config.cluster_tag, &bundle.clusters_file) {
            (Some(tag), _) => ClusterStrategy::ByTag { tag_key: tag.clone() },
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Grouping {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                ClusterStrategy::Manual {
                    groups: parse_grouping_file(&text)?,
                }
            }
            (None, None) => ClusterStrategy::ByEntityType,
        };
        let tree = build_cluster_tree(&loaded.graph, &strategy)?;
        let embedder = make_embedder(&config.embedder)?;
        let index = if loaded.corpus.is_empty() {
            None
        } else {
            let chunks = chunk_corpus(&loaded.corpus, config.chunk_max_tokens, config.chunk_overlap_tokens)?;
            Some(Arc::new(build_index(&chunks, embedder.as_ref())?))
        };
        let documents_dir = config.documents_dir.clone().or_else(|| bundle.documents_dir.clone());
        log::info!(
            "loaded {} entities, {} relationships, {} clusters, {} chunks",
            loaded.graph.entity_count(),
            loaded.graph.relationship_count(),
            tree.len(),
            index.as_ref().map_or(0, |i| i.len())
        );
        Ok(Dataset {
            base: Arc::new(loaded.graph.clone()),
            loaded,
            strategy,
            tree: Arc::new(tree),
            index,
            embedder,
            documents_dir,
        })
    }

    /// Cluster tree for a subgraph of the base graph.
    pub fn tree_for(&self, g: &LogGraph) -> Result<ClusterTree, ClusterError> {
        let strategy = match &self.strategy {
            ClusterStrategy::Manual { groups } => ClusterStrategy::Manual {
                groups: restrict_groups(groups, g),
            },
            other => other.clone(),
        };
        build_cluster_tree(g, &strategy)
    }

    /// Resolves a bill; relative document uris are served under `/documents/`.
    pub fn resolve_bill(&self, bill_id: &str) -> Option<ResolvedBill> {
        let mut b = self.loaded.resolve_bill(bill_id)?;
        if !b.uri.contains("://") && !b.uri.starts_with('/') {
            b.uri = format!("/documents/{}", b.uri);
        }
        Some(b)
    }
}
