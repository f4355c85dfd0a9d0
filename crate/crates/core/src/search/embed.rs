use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::hash::fnv1a64;

pub const HASH_NGRAM_ID: &str = "hash-ngram-v1";
pub const HASH_NGRAM_DIM: usize = 256;

/// A fixed-dimension vector with its Euclidean norm cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub norm: f64,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Embedding { values, norm }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    /// Cosine similarity; zero when either vector is zero.
    pub fn cosine(&self, other: &Embedding) -> f64 {
        if self.norm == 0.0 || other.norm == 0.0 {
            return 0.0;
        }
        self.dot(other) / (self.norm * other.norm)
    }
}

pub trait Embedder: Send + Sync {
    /// Model identifier recorded in indices built with this embedder.
    fn id(&self) -> &str;

    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Embedding, SearchError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, SearchError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Character 3-gram hashing embedder.
///
/// Text is lowercased, every non-alphanumeric character becomes a space,
/// whitespace runs collapse to one space and the result is padded with a
/// space on each side. Each 3-character window is hashed with 64-bit FNV-1a
/// over its UTF-8 bytes into one of 256 buckets; a bucket hit `c` times gets
/// weight `1 + ln c`, and the vector is L2-normalized.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashNgramEmbedder;

pub(crate) fn normalize_text(text: &str) -> String {
    let mapped: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let words: Vec<&str> = mapped.split_whitespace().collect();
    if words.is_empty() {
        String::new()
    } else {
        format!(" {} ", words.join(" "))
    }
}

impl Embedder for HashNgramEmbedder {
    fn id(&self) -> &str {
        HASH_NGRAM_ID
    }

    fn dimension(&self) -> usize {
        HASH_NGRAM_DIM
    }

    fn embed(&self, text: &str) -> Result<Embedding, SearchError> {
        let norm = normalize_text(text);
        if norm.is_empty() {
            return Err(SearchError::EmptyText);
        }
        let chars: Vec<char> = norm.chars().collect();
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        let mut gram = String::with_capacity(12);
        for w in chars.windows(3) {
            gram.clear();
            gram.extend(w);
            *counts.entry((fnv1a64(gram.as_bytes()) % HASH_NGRAM_DIM as u64) as usize).or_default() += 1;
        }
        let mut values = vec![0.0; HASH_NGRAM_DIM];
        for (bucket, c) in counts {
            values[bucket] = 1.0 + (c as f64).ln();
        }
        let raw = Embedding::new(values);
        let unit = raw.values.iter().map(|v| v / raw.norm).collect();
        Ok(Embedding::new(unit))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_unit_vectors() {
        let e = HashNgramEmbedder;
        let a = e.embed("funding").unwrap();
        assert_eq!(a, e.embed("funding").unwrap());
        assert!((a.norm - 1.0).abs() < 1e-12);
        assert!((a.cosine(&a) - 1.0).abs() < 1e-12);
        assert_eq!(a.dimension(), 256);
    }

    #[test]
    fn related_words_score_higher() {
        let e = HashNgramEmbedder;
        let q = e.embed("appropriation funds").unwrap();
        let near = e.embed("appropriation funding").unwrap();
        let far = e.embed("privacy study").unwrap();
        assert!(q.cosine(&near) > q.cosine(&far));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_text("  Parent's PLAN. "), " parent s plan ");
        assert_eq!(normalize_text("?!"), "");
        assert!(matches!(HashNgramEmbedder.embed(" \n"), Err(SearchError::EmptyText)));
        assert_eq!(HashNgramEmbedder.embed("Age 26").unwrap(), HashNgramEmbedder.embed("age, 26").unwrap());
    }
}
