//! Independent reference implementations, written for clarity not speed.

use legiscout_core::model::LogGraph;

/// Neighbor ids of `id` by scanning every relationship.
/// `dir`: 0 = in, 1 = out, 2 = both.
pub fn neighbor_rel_ids(g: &LogGraph, id: &str, dir: u8) -> Vec<String> {
    let mut out: Vec<String> = g
        .relationships()
        .filter(|r| {
            let outgoing = r.source == id || (!r.directed && r.target == id);
            let incoming = r.target == id || (!r.directed && r.source == id);
            match dir {
                0 => incoming,
                1 => outgoing,
                _ => incoming || outgoing,
            }
        })
        .map(|r| r.id.clone())
        .collect();
    out.sort();
    out
}

/// Visible node for `entity` under a grouping: the supernode of its
/// outermost collapsed enclosing group, found by walking parent links.
pub fn representative(
    groups: &legiscout_core::cluster::GroupingFile,
    collapsed: &std::collections::BTreeSet<String>,
    entity: &str,
) -> String {
    let mut chain = Vec::new();
    let mut cur = groups.iter().find(|(_, s)| s.members.iter().any(|m| m == entity)).map(|(id, _)| id.clone());
    while let Some(c) = cur {
        cur = groups[&c].parent.clone();
        chain.push(c);
    }
    match chain.iter().rev().find(|c| collapsed.contains(*c)) {
        Some(c) => format!("cluster:{c}"),
        None => entity.to_string(),
    }
}

/// Brute-force weight of every visible edge key after folding.
/// Keys are (source, target, rel_type, directed) with undirected pairs sorted;
/// edges inside one supernode are reported under key ("", "", _, _).
pub fn folded_weights(
    g: &LogGraph,
    groups: &legiscout_core::cluster::GroupingFile,
    collapsed: &std::collections::BTreeSet<String>,
) -> std::collections::BTreeMap<(String, String, String, bool), f64> {
    let mut out = std::collections::BTreeMap::new();
    for r in g.relationships() {
        let mut s = representative(groups, collapsed, &r.source);
        let mut t = representative(groups, collapsed, &r.target);
        if s == t && s.starts_with("cluster:") {
            s.clear();
            t.clear();
        } else if !r.directed && t < s {
            std::mem::swap(&mut s, &mut t);
        }
        let ty = serde_json::to_value(r.rel_type).unwrap().as_str().unwrap().to_string();
        *out.entry((s, t, ty, r.directed)).or_insert(0.0) += r.weight;
    }
    out
}

/// Reference character 3-gram hasher, written from the embedder's
/// description: normalize, hash each window with FNV-1a 64, log-scale
/// bucket counts, divide by the Euclidean norm.
pub fn reference_ngram_vector(text: &str) -> Option<Vec<f64>> {
    let mut norm = String::from(" ");
    let mut last_space = true;
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            norm.push(c);
            last_space = false;
        } else if !last_space {
            norm.push(' ');
            last_space = true;
        }
    }
    if norm.trim().is_empty() {
        return None;
    }
    if !last_space {
        norm.push(' ');
    }
    let chars: Vec<char> = norm.chars().collect();
    let mut counts = [0u32; 256];
    for i in 0..chars.len() - 2 {
        let gram: String = chars[i..i + 3].iter().collect();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in gram.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        counts[(h % 256) as usize] += 1;
    }
    let raw: Vec<f64> = counts.iter().map(|&c| if c == 0 { 0.0 } else { 1.0 + (c as f64).ln() }).collect();
    let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    Some(raw.iter().map(|v| v / n).collect())
}

pub fn reference_cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// Every chunk scored against the query and sorted by (score desc, id asc).
pub fn brute_force_ranking(chunks: &[(String, String)], query: &str) -> Vec<(String, f64)> {
    let q = reference_ngram_vector(query).expect("query has content");
    let mut scored: Vec<(String, f64)> = chunks
        .iter()
        .map(|(id, text)| (id.clone(), reference_cosine(&q, &reference_ngram_vector(text).expect("chunk has content"))))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored
}

/// Linear scan with the documented keyword scores: exact name 3, name
/// prefix 2, name or tag substring 1. Sorted by (score desc, id asc).
pub fn keyword_scan(g: &LogGraph, query: &str) -> Vec<(String, f64)> {
    let q = query.trim().to_lowercase();
    let mut out = Vec::new();
    for e in g.entities() {
        let name = e.name.to_lowercase();
        let mut score = 0.0;
        if name.contains(&q) || e.tags.iter().any(|t| t.to_lowercase().contains(&q)) {
            score = 1.0;
        }
        if name.starts_with(&q) {
            score = 2.0;
        }
        if name == q {
            score = 3.0;
        }
        if score > 0.0 {
            out.push((e.id.clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    out
}

/// Regroups scored hits by linked entity: total score and supporting chunk
/// set per entity, counting only hits with positive score.
pub fn regroup(
    hits: &[(String, f64, Vec<String>)],
    known: &dyn Fn(&str) -> bool,
) -> std::collections::BTreeMap<String, (f64, std::collections::BTreeSet<String>)> {
    let mut out: std::collections::BTreeMap<String, (f64, std::collections::BTreeSet<String>)> = Default::default();
    for (chunk, score, entities) in hits {
        if *score <= 0.0 {
            continue;
        }
        for e in entities.iter().filter(|e| known(e)) {
            let slot = out.entry(e.clone()).or_default();
            slot.0 += score;
            slot.1.insert(chunk.clone());
        }
    }
    out
}
