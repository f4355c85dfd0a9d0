//! Keyword search over entities and semantic search over bill-text chunks.
//!
//! Rankings are exact and deterministic: every result list is sorted by
//! score descending, then target id ascending.

mod chunk;
mod embed;
mod index;
mod remote;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BillRef, LogGraph};

pub use chunk::{chunk_corpus, TextChunk};
pub use embed::{Embedder, Embedding, HashNgramEmbedder, HASH_NGRAM_DIM, HASH_NGRAM_ID};
pub use index::{build_index, ChunkIndex, IndexEntry, INDEX_FORMAT};
pub use remote::{RemoteEmbedder, RemoteOptions};

pub const DEFAULT_MAX_TOKENS: usize = 128;
pub const DEFAULT_OVERLAP_TOKENS: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("text to embed is empty")]
    EmptyText,
    #[error("result limit must be at least 1")]
    InvalidLimit,
    #[error("chunking needs max_tokens > overlap_tokens >= 0 (got {max_tokens}, {overlap_tokens})")]
    InvalidChunking { max_tokens: usize, overlap_tokens: usize },
    #[error("index has no chunks")]
    EmptyIndex,
    #[error("duplicate chunk id `{0}`")]
    DuplicateChunk(String),
    #[error("index was built with embedder `{index}`, but `{embedder}` is active")]
    EmbedderMismatch { index: String, embedder: String },
    #[error("chunk `{chunk_id}` has dimension {found}, index expects {expected}")]
    DimensionMismatch { chunk_id: String, expected: usize, found: usize },
    #[error("cannot embed chunk `{chunk_id}`: {source}")]
    Embed {
        chunk_id: String,
        #[source]
        source: Box<SearchError>,
    },
    #[error("embedding service unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("embedding service error: {0}")]
    Remote(String),
    #[error("malformed index: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitKind {
    KeywordEntity,
    SemanticChunk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    pub text: String,
    /// Character ranges `[start, end)` of the matches within `text`.
    pub offsets: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub target: String,
    pub score: f64,
    pub kind: HitKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet: Option<Snippet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bill_ref: Option<BillRef>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub linked_entities: BTreeSet<String>,
}

fn rank(hits: &mut [SearchHit]) {
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.target.cmp(&b.target)));
}

fn char_range(haystack: &str, byte_start: usize, needle_len_chars: usize) -> [usize; 2] {
    let start = haystack[..byte_start].chars().count();
    [start, start + needle_len_chars]
}

/// Case-insensitive match on entity names and tags. Scores: exact name 3,
/// name prefix 2, name or tag substring 1.
pub fn keyword_search(g: &LogGraph, query: &str, limit: usize) -> Result<Vec<SearchHit>, SearchError> {
    let q = query.trim().to_lowercase();
    if q.is_empty() {
        return Err(SearchError::EmptyQuery);
    }
    if limit == 0 {
        return Err(SearchError::InvalidLimit);
    }
    let qlen = q.chars().count();
    let mut hits: Vec<SearchHit> = g
        .entities()
        .filter_map(|e| {
            let name = e.name.to_lowercase();
            let score = if name == q {
                3.0
            } else if name.starts_with(&q) {
                2.0
            } else if name.contains(&q) || e.tags.iter().any(|t| t.to_lowercase().contains(&q)) {
                1.0
            } else {
                return None;
            };
            let offsets = name.match_indices(&q).map(|(i, _)| char_range(&name, i, qlen)).collect();
            Some(SearchHit {
                target: e.id.clone(),
                score,
                kind: HitKind::KeywordEntity,
                snippet: Some(Snippet {
                    text: e.name.clone(),
                    offsets,
                }),
                bill_ref: e.bill_refs.first().cloned(),
                linked_entities: BTreeSet::new(),
            })
        })
        .collect();
    rank(&mut hits);
    hits.truncate(limit);
    Ok(hits)
}

/// Top-`k` chunks by exact cosine similarity to the query.
pub fn semantic_search(index: &ChunkIndex, embedder: &dyn Embedder, query: &str, k: usize) -> Result<Vec<SearchHit>, SearchError> {
    if query.trim().is_empty() {
        return Err(SearchError::EmptyQuery);
    }
    if k == 0 {
        return Err(SearchError::InvalidLimit);
    }
    if embedder.id() != index.embedder_id() {
        return Err(SearchError::EmbedderMismatch {
            index: index.embedder_id().to_string(),
            embedder: embedder.id().to_string(),
        });
    }
    if index.is_empty() {
        return Err(SearchError::EmptyIndex);
    }
    let q = match embedder.embed(query) {
        Ok(q) => q,
        // Punctuation-only queries normalize to nothing.
        Err(SearchError::EmptyText) => return Err(SearchError::EmptyQuery),
        Err(e) => return Err(e),
    };
    let mut hits: Vec<SearchHit> = index
        .entries()
        .map(|e| SearchHit {
            target: e.chunk.chunk_id.clone(),
            score: q.cosine(&e.vector),
            kind: HitKind::SemanticChunk,
            snippet: Some(Snippet {
                text: e.chunk.text.clone(),
                offsets: Vec::new(),
            }),
            bill_ref: Some(e.chunk.bill_ref.clone()),
            linked_entities: e.chunk.linked_entities.clone(),
        })
        .collect();
    rank(&mut hits);
    hits.truncate(k);
    Ok(hits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityLink {
    pub entity_id: String,
    pub score: f64,
    pub chunk_ids: Vec<String>,
}

/// Entities supported by the chunks a term retrieves, ranked by the summed
/// score of their positively-scoring supporting chunks.
pub fn link_terms_to_graph(
    g: &LogGraph,
    index: &ChunkIndex,
    embedder: &dyn Embedder,
    term: &str,
    k: usize,
) -> Result<Vec<EntityLink>, SearchError> {
    let hits = semantic_search(index, embedder, term, k)?;
    let mut by_entity: BTreeMap<&str, EntityLink> = BTreeMap::new();
    for h in hits.iter().filter(|h| h.score > 0.0) {
        for e in h.linked_entities.iter().filter(|e| g.contains_entity(e)) {
            let link = by_entity.entry(e).or_insert_with(|| EntityLink {
                entity_id: e.clone(),
                score: 0.0,
                chunk_ids: Vec::new(),
            });
            link.score += h.score;
            link.chunk_ids.push(h.target.clone());
        }
    }
    let mut out: Vec<EntityLink> = by_entity.into_values().collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.entity_id.cmp(&b.entity_id)));
    Ok(out)
}
