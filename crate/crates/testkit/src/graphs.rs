//! Random graphs, datasets with injected faults, and random corpora.

use legiscout_core::ingest::CorpusSection;
use legiscout_core::model::{BillRef, Entity, EntityType, LogGraph, RelType, Relationship};
use serde_json::{json, Value};

use crate::rng::Rng;

const TAGS: &[&str] = &["medicaid", "funding", "oversight", "exchange", "tax", "research", "privacy", "state"];

/// Random valid graph with `n` entities and up to `m` relationships.
pub fn random_graph(seed: u64, n: usize, m: usize) -> LogGraph {
    let mut rng = Rng::new(seed);
    let mut g = LogGraph::new();
    for i in 0..n {
        let mut e = Entity::new(format!("e{i:03}"), format!("Entity {i}"), *rng.pick(&EntityType::ALL));
        for _ in 0..rng.below(3) {
            e.tags.insert(rng.pick(TAGS).to_string());
        }
        g.add_entity(e).unwrap();
    }
    if n == 0 {
        return g;
    }
    let mut attempts = 0;
    let mut k = 0;
    while k < m && attempts < m * 20 {
        attempts += 1;
        let (a, b) = (rng.below(n), rng.below(n));
        if a == b {
            continue;
        }
        let mut r = Relationship::new(format!("r{k:04}"), format!("e{a:03}"), format!("e{b:03}"), *rng.pick(&RelType::ALL))
            .with_weight(rng.range(1, 5) as f64);
        if rng.chance(0.2) {
            r = r.undirected();
        }
        if g.add_relationship(r).is_ok() {
            k += 1;
        }
    }
    g
}

/// Connected random graph: a random spanning tree plus `extra` chords.
pub fn random_connected_graph(seed: u64, n: usize, extra: usize) -> LogGraph {
    let mut rng = Rng::new(seed ^ 0x5eed);
    let mut g = random_graph(seed, n, 0);
    let mut k = 0;
    for i in 1..n {
        let j = rng.below(i);
        g.add_relationship(Relationship::new(format!("t{k:04}"), format!("e{i:03}"), format!("e{j:03}"), RelType::Regulatory))
            .unwrap();
        k += 1;
    }
    let mut added = 0;
    while added < extra && n > 2 {
        let (a, b) = (rng.below(n), rng.below(n));
        if a != b
            && g.add_relationship(Relationship::new(format!("t{k:04}"), format!("e{a:03}"), format!("e{b:03}"), RelType::Funding))
                .is_ok()
        {
            k += 1;
            added += 1;
        }
    }
    g
}

/// A serialized dataset with exactly `faults` injected violations.
#[derive(Debug, Clone)]
pub struct FaultyDataset {
    pub json: String,
    pub faults: usize,
    /// (kind, record id) per injected fault.
    pub injected: Vec<(&'static str, String)>,
}

/// Valid dataset JSON with `n` entities, and `m` edges; returns ground truth.
pub fn valid_dataset(seed: u64, n: usize, m: usize) -> (String, usize, usize) {
    let g = random_graph(seed, n, m);
    (g.to_json_pretty(), g.entity_count(), g.relationship_count())
}

/// Starts from a random valid graph and injects `faults` violations, each
/// constructed so that it yields exactly one validation item.
pub fn faulty_dataset(seed: u64, faults: usize) -> FaultyDataset {
    let mut rng = Rng::new(seed.wrapping_mul(31).wrapping_add(7));
    let g = random_graph(seed, 12, 18);
    let mut doc: Value = serde_json::from_str(&g.to_json_pretty()).unwrap();
    let rel_ids: Vec<String> = g.relationships().map(|r| r.id.clone()).collect();
    let existing: Vec<Relationship> = g.relationships().cloned().collect();
    let mut injected = Vec::new();

    let kinds = [
        "invalid_id",
        "duplicate_entity",
        "dangling",
        "zero_weight",
        "duplicate_relationship_id",
        "page_zero",
        "unknown_field",
        "bad_enum",
        "duplicate_triple",
    ];
    for f in 0..faults {
        let kind = *rng.pick(&kinds);
        let spare = format!("spare{f}");
        let entities = doc["entities"].as_array_mut().unwrap();
        // A fresh, valid entity for the fault to hang off.
        entities.push(json!({"id": spare, "name": spare, "entity_type": "other"}));
        let last = entities.len() - 1;
        let rels_len = doc["relationships"].as_array().unwrap().len();
        let rel = |id: String, src: &str, tgt: &str, ty: &str| json!({"id": id, "source": src, "target": tgt, "rel_type": ty});
        match kind {
            "invalid_id" => {
                doc["entities"][last]["id"] = json!(format!("bad id {f}"));
            }
            "duplicate_entity" => {
                doc["entities"][last]["id"] = json!("e000");
            }
            "dangling" => {
                doc["relationships"]
                    .as_array_mut()
                    .unwrap()
                    .push(rel(format!("fault{f}"), &spare, &format!("ghost{f}"), "funding"));
            }
            "zero_weight" => {
                let mut r = rel(format!("fault{f}"), &spare, "e000", "funding");
                r["weight"] = json!(0.0);
                doc["relationships"].as_array_mut().unwrap().push(r);
            }
            "duplicate_relationship_id" => {
                let dup = if rel_ids.is_empty() { "none".to_string() } else { rel_ids[rng.below(rel_ids.len())].clone() };
                doc["relationships"]
                    .as_array_mut()
                    .unwrap()
                    .push(rel(dup, &spare, "e000", "oversight"));
            }
            "page_zero" => {
                doc["entities"][last]["bill_refs"] = json!([{"bill_id": "SEC-1", "document_id": "doc", "page": 0}]);
            }
            "unknown_field" => {
                doc["entities"][last]["colour"] = json!("red");
            }
            "bad_enum" => {
                doc["entities"][last]["entity_type"] = json!("martian");
            }
            "duplicate_triple" => {
                let r = &existing[rng.below(existing.len())];
                let ty = serde_json::to_value(r.rel_type).unwrap();
                let mut v = rel(format!("fault{f}"), &r.source, &r.target, ty.as_str().unwrap());
                v["directed"] = json!(r.directed);
                doc["relationships"].as_array_mut().unwrap().push(v);
            }
            _ => unreachable!(),
        }
        let _ = rels_len;
        injected.push((kind, spare));
    }
    FaultyDataset {
        json: serde_json::to_string_pretty(&doc).unwrap(),
        faults,
        injected,
    }
}

const WORDS: &[&str] = &[
    "coverage", "dependents", "age", "plan", "funding", "appropriation", "secretary", "state", "grant", "exchange",
    "eligibility", "privacy", "study", "report", "medicaid", "insurer", "premium", "credit", "research", "outcomes",
    "oversight", "audit", "program", "enrollment", "individual", "employer", "benefit", "federal", "trust", "fund",
];

/// Random corpus: `sections` sections of 5..=`max_words` words each.
pub fn random_corpus(seed: u64, sections: usize, max_words: usize) -> Vec<CorpusSection> {
    let mut rng = Rng::new(seed);
    (0..sections)
        .map(|i| {
            let n = rng.range(5, max_words.max(5) as u64) as usize;
            let text = (0..n).map(|_| *rng.pick(WORDS)).collect::<Vec<_>>().join(" ");
            CorpusSection {
                section_id: format!("SEC-{i:04}"),
                title: format!("Section {i}"),
                text,
                document_id: "doc".into(),
                page: (i as u32 % 50) + 1,
                linked_entities: Default::default(),
            }
        })
        .collect()
}

/// Random query made from corpus words.
pub fn random_query(rng: &mut Rng) -> String {
    let n = 1 + rng.below(4);
    (0..n).map(|_| *rng.pick(WORDS)).collect::<Vec<_>>().join(" ")
}

/// A bill ref for generated entities.
pub fn bill(bill_id: &str, page: u32) -> BillRef {
    BillRef {
        bill_id: bill_id.into(),
        document_id: "doc".into(),
        page,
    }
}

/// Random nested grouping over some of the graph's entities: up to
/// `clusters` groups, each with a random earlier group as parent half the
/// time, entities dealt to groups at random (some left out).
pub fn random_grouping(seed: u64, g: &LogGraph, clusters: usize) -> legiscout_core::cluster::GroupingFile {
    use legiscout_core::cluster::GroupSpec;
    let mut rng = Rng::new(seed);
    let mut groups: legiscout_core::cluster::GroupingFile = Default::default();
    let ids: Vec<String> = (0..clusters.max(1)).map(|i| format!("g{i:02}")).collect();
    for (i, id) in ids.iter().enumerate() {
        let parent = (i > 0 && rng.chance(0.5)).then(|| ids[rng.below(i)].clone());
        groups.insert(id.clone(), GroupSpec { label: format!("Group {i}"), members: Vec::new(), parent });
    }
    for e in g.entity_ids() {
        if rng.chance(0.8) {
            let id = rng.pick(&ids).clone();
            groups.get_mut(&id).unwrap().members.push(e.to_string());
        }
    }
    // Every group needs a member or a child; give empty leaves nothing and drop them.
    loop {
        let has_child: std::collections::BTreeSet<String> = groups.values().filter_map(|s| s.parent.clone()).collect();
        let empty: Vec<String> = groups
            .iter()
            .filter(|(id, s)| s.members.is_empty() && !has_child.contains(*id))
            .map(|(id, _)| id.clone())
            .collect();
        if empty.is_empty() {
            break;
        }
        for id in empty {
            groups.remove(&id);
        }
    }
    groups
}
