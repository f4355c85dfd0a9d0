use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::ingest::CorpusSection;
use crate::model::BillRef;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextChunk {
    pub chunk_id: String,
    pub section_id: String,
    pub text: String,
    pub token_count: usize,
    pub bill_ref: BillRef,
    #[serde(default)]
    pub linked_entities: BTreeSet<String>,
}

/// Splits each section into whitespace-token windows of `max_tokens` that
/// overlap by `overlap_tokens`. Chunks never span sections; the last window
/// of a section ends at its last token.
pub fn chunk_corpus(sections: &[CorpusSection], max_tokens: usize, overlap_tokens: usize) -> Result<Vec<TextChunk>, SearchError> {
    if max_tokens == 0 || overlap_tokens >= max_tokens {
        return Err(SearchError::InvalidChunking {
            max_tokens,
            overlap_tokens,
        });
    }
    let step = max_tokens - overlap_tokens;
    let mut out = Vec::new();
    for s in sections {
        let tokens: Vec<&str> = s.text.split_whitespace().collect();
        let mut start = 0;
        let mut n = 0;
        while start < tokens.len() {
            let end = (start + max_tokens).min(tokens.len());
            out.push(TextChunk {
                chunk_id: format!("{}#{n}", s.section_id),
                section_id: s.section_id.clone(),
                text: tokens[start..end].join(" "),
                token_count: end - start,
                bill_ref: BillRef {
                    bill_id: s.section_id.clone(),
                    document_id: s.document_id.clone(),
                    page: s.page,
                },
                linked_entities: s.linked_entities.clone(),
            });
            if end == tokens.len() {
                break;
            }
            start += step;
            n += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section(id: &str, words: usize) -> CorpusSection {
        CorpusSection {
            section_id: id.into(),
            title: String::new(),
            text: (1..=words).map(|i| format!("t{i}")).collect::<Vec<_>>().join(" "),
            document_id: "doc".into(),
            page: 3,
            linked_entities: BTreeSet::new(),
        }
    }

    #[test]
    fn window_arithmetic() {
        let chunks = chunk_corpus(&[section("S", 10)], 4, 1).unwrap();
        let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, ["t1 t2 t3 t4", "t4 t5 t6 t7", "t7 t8 t9 t10"]);
        assert_eq!(chunks[2].chunk_id, "S#2");
        assert_eq!(chunks[0].bill_ref.page, 3);
    }

    #[test]
    fn short_section_single_chunk() {
        let chunks = chunk_corpus(&[section("S", 3), section("T", 0)], 8, 2).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].token_count, 3);
    }

    #[test]
    fn bad_parameters() {
        assert!(chunk_corpus(&[], 4, 4).is_err());
        assert!(chunk_corpus(&[], 0, 0).is_err());
        assert!(chunk_corpus(&[], 4, 0).is_ok());
    }
}
