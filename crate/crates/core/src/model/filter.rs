use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{normalize_tags, Entity, EntityType, LogGraph, RelType, Relationship};

/// Conjunctive predicate over entity type, tags and relationship type.
///
/// Empty sets place no constraint. An entity survives when its type is in
/// `entity_types` and it carries every tag in `tags`; a relationship survives
/// when both endpoints survive and its type is in `rel_types`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    #[serde(default)]
    pub entity_types: BTreeSet<EntityType>,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    #[serde(default)]
    pub rel_types: BTreeSet<RelType>,
}

impl FilterSpec {
    pub fn tag(tag: &str) -> Self {
        FilterSpec {
            tags: normalize_tags([tag]),
            ..Default::default()
        }
    }

    pub fn matches_entity(&self, e: &Entity) -> bool {
        (self.entity_types.is_empty() || self.entity_types.contains(&e.entity_type))
            && normalize_tags(&self.tags).iter().all(|t| e.tags.contains(t))
    }

    pub fn matches_relationship(&self, r: &Relationship) -> bool {
        self.rel_types.is_empty() || self.rel_types.contains(&r.rel_type)
    }
}

/// Induced subgraph of the entities matching `spec`.
pub fn filter_subgraph(g: &LogGraph, spec: &FilterSpec) -> LogGraph {
    let mut out = LogGraph::new();
    for (k, v) in g.meta() {
        out.set_meta(k.clone(), v.clone());
    }
    for e in g.entities().filter(|e| spec.matches_entity(e)) {
        out.add_entity(e.clone()).expect("entities of a valid graph stay valid");
    }
    for r in g.relationships() {
        if spec.matches_relationship(r)
            && out.contains_entity(&r.source)
            && out.contains_entity(&r.target)
        {
            out.add_relationship(r.clone())
                .expect("relationships of a valid graph stay valid");
        }
    }
    out.record_entity_types();
    out
}
