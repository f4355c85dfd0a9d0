use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chunk::TextChunk;
use super::embed::{Embedder, Embedding};
use super::SearchError;

pub const INDEX_FORMAT: &str = "legiscout-index-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub chunk: TextChunk,
    pub vector: Embedding,
}

/// Chunks and their embeddings, all of one dimension and one embedder.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkIndex {
    embedder_id: String,
    dimension: usize,
    entries: BTreeMap<String, IndexEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredEntry {
    #[serde(flatten)]
    chunk: TextChunk,
    vector: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredIndex {
    format: String,
    embedder_id: String,
    dimension: usize,
    chunks: Vec<StoredEntry>,
}

impl ChunkIndex {
    pub fn new(embedder_id: impl Into<String>, dimension: usize) -> Self {
        ChunkIndex {
            embedder_id: embedder_id.into(),
            dimension,
            entries: BTreeMap::new(),
        }
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, chunk_id: &str) -> Option<&IndexEntry> {
        self.entries.get(chunk_id)
    }

    /// Entries in chunk id order.
    pub fn entries(&self) -> impl ExactSizeIterator<Item = &IndexEntry> {
        self.entries.values()
    }

    pub fn insert(&mut self, chunk: TextChunk, vector: Embedding) -> Result<(), SearchError> {
        if vector.dimension() != self.dimension {
            return Err(SearchError::DimensionMismatch {
                chunk_id: chunk.chunk_id,
                expected: self.dimension,
                found: vector.dimension(),
            });
        }
        if self.entries.contains_key(&chunk.chunk_id) {
            return Err(SearchError::DuplicateChunk(chunk.chunk_id));
        }
        self.entries.insert(chunk.chunk_id.clone(), IndexEntry { chunk, vector });
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let stored = StoredIndex {
            format: INDEX_FORMAT.into(),
            embedder_id: self.embedder_id.clone(),
            dimension: self.dimension,
            chunks: self
                .entries
                .values()
                .map(|e| StoredEntry {
                    chunk: e.chunk.clone(),
                    vector: e.vector.values.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&stored).expect("index serializes")
    }

    /// Parses a stored index; fails if it was built by another embedder.
    pub fn from_json(text: &str, expected_embedder: &str) -> Result<Self, SearchError> {
        let stored: StoredIndex = serde_json::from_str(text).map_err(|e| SearchError::Format(e.to_string()))?;
        if stored.format != INDEX_FORMAT {
            return Err(SearchError::Format(format!("unsupported index format `{}`", stored.format)));
        }
        if stored.embedder_id != expected_embedder {
            return Err(SearchError::EmbedderMismatch {
                index: stored.embedder_id,
                embedder: expected_embedder.to_string(),
            });
        }
        let mut index = ChunkIndex::new(stored.embedder_id, stored.dimension);
        for e in stored.chunks {
            index.insert(e.chunk, Embedding::new(e.vector))?;
        }
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<(), SearchError> {
        std::fs::write(path, self.to_json()).map_err(|e| SearchError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path, expected_embedder: &str) -> Result<Self, SearchError> {
        let text = std::fs::read_to_string(path).map_err(|e| SearchError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, expected_embedder)
    }
}

/// Embeds every chunk. Errors name the chunk that failed.
pub fn build_index(chunks: &[TextChunk], embedder: &dyn Embedder) -> Result<ChunkIndex, SearchError> {
    if chunks.is_empty() {
        return Err(SearchError::EmptyIndex);
    }
    let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
    let vectors = match embedder.embed_batch(&texts) {
        Ok(v) => v,
        Err(_) => {
            // Re-run one at a time to find the offending chunk.
            for c in chunks {
                embedder.embed(&c.text).map_err(|e| SearchError::Embed {
                    chunk_id: c.chunk_id.clone(),
                    source: Box::new(e),
                })?;
            }
            return Err(SearchError::Remote("batch embedding failed but every chunk embeds alone".into()));
        }
    };
    let mut index = ChunkIndex::new(embedder.id(), embedder.dimension());
    for (c, v) in chunks.iter().zip(vectors) {
        index.insert(c.clone(), v)?;
    }
    Ok(index)
}
