//! Core library for LegiScout: the legislative-organizational graph model,
//! dataset ingestion, chart structure extraction, force-directed layout,
//! hierarchical clustering and keyword/semantic search.

pub mod cluster;
pub mod extract;
pub(crate) mod hash;
pub mod ingest;
pub mod layout;
pub mod model;
pub mod search;
