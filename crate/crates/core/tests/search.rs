use std::collections::BTreeSet;

use legiscout_core::ingest::CorpusSection;
use legiscout_core::search::{
    build_index, chunk_corpus, keyword_search, link_terms_to_graph, semantic_search, ChunkIndex, Embedder,
    HashNgramEmbedder, HASH_NGRAM_ID,
};
use legiscout_testkit::graphs::{random_corpus, random_graph, random_query};
use legiscout_testkit::oracle::{brute_force_ranking, keyword_scan, reference_ngram_vector, regroup};
use legiscout_testkit::rng::Rng;
use proptest::prelude::*;

#[test]
fn semantic_ranking_equals_brute_force_on_50_corpora() {
    let e = HashNgramEmbedder;
    for seed in 0..50u64 {
        let mut rng = Rng::new(seed ^ 0xc0ffee);
        let sections = random_corpus(seed, rng.range(20, 150) as usize, 40);
        let chunks = chunk_corpus(&sections, 16, 4).unwrap();
        assert!(!chunks.is_empty() && chunks.len() <= 500, "seed {seed}: {} chunks", chunks.len());
        let index = build_index(&chunks, &e).unwrap();
        let pairs: Vec<(String, String)> = chunks.iter().map(|c| (c.chunk_id.clone(), c.text.clone())).collect();
        for _ in 0..5 {
            let q = random_query(&mut rng);
            let expected = brute_force_ranking(&pairs, &q);
            let got = semantic_search(&index, &e, &q, chunks.len() + 10).unwrap();
            let got_ids: Vec<&str> = got.iter().map(|h| h.target.as_str()).collect();
            let want_ids: Vec<&str> = expected.iter().map(|(id, _)| id.as_str()).collect();
            assert_eq!(got_ids, want_ids, "seed {seed} query {q:?}");
            for (h, (_, s)) in got.iter().zip(&expected) {
                assert!((h.score - s).abs() <= 1e-12);
            }
            let k = 1 + rng.below(20);
            let top = semantic_search(&index, &e, &q, k).unwrap();
            assert_eq!(top.len(), k.min(chunks.len()));
            assert!(top.iter().zip(&got).all(|(a, b)| a.target == b.target));
        }
    }
}

#[test]
fn embedder_matches_reference_hasher() {
    let e = HashNgramEmbedder;
    let mut rng = Rng::new(11);
    for _ in 0..200 {
        let text = random_query(&mut rng) + " Parent's, PLAN-26!";
        let want = reference_ngram_vector(&text).unwrap();
        let got = e.embed(&text).unwrap();
        assert_eq!(got.dimension(), want.len());
        assert!(got.values.iter().zip(&want).all(|(a, b)| (a - b).abs() <= 1e-15));
    }
    let sim = |a: &str, b: &str| {
        let (x, y) = (reference_ngram_vector(a).unwrap(), reference_ngram_vector(b).unwrap());
        x.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>()
    };
    assert!(sim("appropriation funds", "appropriation funding") > sim("appropriation funds", "privacy study"));
}

#[test]
fn keyword_search_equals_scan() {
    for seed in 0..50u64 {
        let g = random_graph(seed, 40, 10);
        let mut rng = Rng::new(seed);
        let queries = [
            format!("Entity {}", rng.below(40)),
            format!("entity {}", 1 + rng.below(4)),
            "ENTITY".to_string(),
            "fund".to_string(),
            "med".to_string(),
            "y 2".to_string(),
            "absent".to_string(),
        ];
        for q in &queries {
            let want = keyword_scan(&g, q);
            let got: Vec<(String, f64)> = keyword_search(&g, q, 1000).unwrap().into_iter().map(|h| (h.target, h.score)).collect();
            assert_eq!(got, want, "seed {seed} query {q:?}");
            let limit = 1 + rng.below(5);
            let short = keyword_search(&g, q, limit).unwrap();
            assert_eq!(short.len(), want.len().min(limit));
            let ids: BTreeSet<&str> = got.iter().map(|(id, _)| id.as_str()).collect();
            assert_eq!(ids.len(), got.len());
        }
    }
}

#[test]
fn linking_equals_regrouped_hits() {
    let e = HashNgramEmbedder;
    for seed in 0..20u64 {
        let g = random_graph(seed, 15, 20);
        let mut rng = Rng::new(seed + 99);
        let mut sections = random_corpus(seed, 40, 30);
        let ids: Vec<String> = g.entity_ids().map(str::to_string).chain(["ghost".to_string()]).collect();
        for s in &mut sections {
            for _ in 0..rng.below(4) {
                s.linked_entities.insert(rng.pick(&ids).clone());
            }
        }
        let chunks = chunk_corpus(&sections, 12, 2).unwrap();
        let index = build_index(&chunks, &e).unwrap();
        for _ in 0..4 {
            let term = random_query(&mut rng);
            let k = 1 + rng.below(30);
            let hits = semantic_search(&index, &e, &term, k).unwrap();
            let triples: Vec<(String, f64, Vec<String>)> = hits
                .iter()
                .map(|h| (h.target.clone(), h.score, h.linked_entities.iter().cloned().collect()))
                .collect();
            let want = regroup(&triples, &|id| g.contains_entity(id));
            let links = link_terms_to_graph(&g, &index, &e, &term, k).unwrap();
            assert_eq!(links.len(), want.len());
            for l in &links {
                let (score, support) = &want[&l.entity_id];
                assert!((l.score - score).abs() <= 1e-12);
                assert_eq!(&l.chunk_ids.iter().cloned().collect::<BTreeSet<_>>(), support);
            }
            assert!(links.windows(2).all(|w| w[0].score > w[1].score || (w[0].score == w[1].score && w[0].entity_id < w[1].entity_id)));
        }
    }
}

#[test]
fn index_bytes_are_deterministic_and_reload() {
    let e = HashNgramEmbedder;
    let chunks = chunk_corpus(&random_corpus(5, 60, 40), 16, 4).unwrap();
    let a = build_index(&chunks, &e).unwrap();
    let b = build_index(&chunks, &e).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("index.json");
    a.save(&path).unwrap();
    let loaded = ChunkIndex::load(&path, HASH_NGRAM_ID).unwrap();
    assert_eq!(loaded, a);
    assert_eq!(loaded.len(), chunks.len());
}

fn section(text: String) -> CorpusSection {
    CorpusSection {
        section_id: "S".into(),
        title: String::new(),
        text,
        document_id: "doc".into(),
        page: 1,
        linked_entities: BTreeSet::new(),
    }
}

proptest! {
    #[test]
    fn chunks_cover_every_token(len in 1usize..200, max in 1usize..30, overlap_frac in 0.0f64..1.0) {
        let overlap = ((max as f64) * overlap_frac) as usize % max;
        let text = (0..len).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let chunks = chunk_corpus(&[section(text)], max, overlap).unwrap();
        let mut seen = BTreeSet::new();
        for c in &chunks {
            prop_assert!(c.token_count > 0 && c.token_count <= max);
            prop_assert_eq!(c.token_count, c.text.split_whitespace().count());
            seen.extend(c.text.split_whitespace().map(str::to_string));
        }
        prop_assert_eq!(seen.len(), len);
        let unique: BTreeSet<&str> = chunks.iter().map(|c| c.chunk_id.as_str()).collect();
        prop_assert_eq!(unique.len(), chunks.len());
    }

    #[test]
    fn scores_monotone_and_unique(seed in 0u64..1000, k in 1usize..40) {
        let e = HashNgramEmbedder;
        let chunks = chunk_corpus(&random_corpus(seed, 15, 25), 10, 3).unwrap();
        let index = build_index(&chunks, &e).unwrap();
        let mut rng = Rng::new(seed);
        let hits = semantic_search(&index, &e, &random_query(&mut rng), k).unwrap();
        prop_assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
        let ids: BTreeSet<&str> = hits.iter().map(|h| h.target.as_str()).collect();
        prop_assert_eq!(ids.len(), hits.len());
    }
}
