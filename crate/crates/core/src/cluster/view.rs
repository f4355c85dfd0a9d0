use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{supernode_id, ClusterError, ClusterTree};
use crate::layout::{LayoutParams, LayoutState};
use crate::model::{Entity, EntityType, GraphDocument, LogGraph, RelType, Relationship, Shape, SizeClass, StyleHint};

/// Id prefix of relationships that aggregate re-targeted edges.
pub const AGGREGATE_PREFIX: &str = "cluster:agg:";

/// Metadata key listing the relationship ids an aggregate stands for.
const AGGREGATED_FROM: &str = "aggregated_from";

/// A graph as currently shown: the base graph with every collapsed cluster
/// replaced by a supernode.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewGraph {
    base: Arc<LogGraph>,
    pub graph: LogGraph,
    /// Supernode id → original entity ids it stands for.
    pub supernode_map: BTreeMap<String, BTreeSet<String>>,
    /// Relationships with both endpoints inside one supernode.
    pub hidden: BTreeSet<String>,
    /// Collapsed cluster ids, including ones nested in a collapsed ancestor.
    pub collapsed: BTreeSet<String>,
    /// Entity id → supernode currently standing for it.
    represented: BTreeMap<String, String>,
}

type AggregateKey = (String, String, RelType, bool);

impl ViewGraph {
    /// The fully expanded view of `base`.
    pub fn new(base: impl Into<Arc<LogGraph>>) -> Self {
        Self::derive(base.into(), &ClusterTree::default(), BTreeSet::new())
    }

    pub fn base(&self) -> &LogGraph {
        &self.base
    }

    pub fn is_collapsed(&self, cluster_id: &str) -> bool {
        self.collapsed.contains(cluster_id)
    }

    /// The visible node standing for `entity_id`: itself or its supernode.
    pub fn representative<'a>(&'a self, entity_id: &'a str) -> &'a str {
        self.represented.get(entity_id).map_or(entity_id, String::as_str)
    }

    /// Serializable form; supernodes are declared so the document passes
    /// ingest validation.
    pub fn to_document(&self) -> GraphDocument {
        let mut doc = self.graph.to_document();
        doc.supernodes = self.supernode_map.clone();
        doc
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("view serializes")
    }

    /// Visible plus hidden relationship weight.
    pub fn conserved_weight(&self) -> f64 {
        self.graph.total_weight()
            + self
                .hidden
                .iter()
                .filter_map(|id| self.base.relationship(id))
                .map(|r| r.weight)
                .sum::<f64>()
    }

    /// Derives the view of `base` with `collapsed` clusters folded.
    pub fn derive(base: Arc<LogGraph>, tree: &ClusterTree, collapsed: BTreeSet<String>) -> Self {
        let outermost: Vec<&str> = collapsed
            .iter()
            .map(String::as_str)
            .filter(|c| !tree.ancestors(c).skip(1).any(|a| collapsed.contains(a)))
            .collect();

        let mut supernode_map = BTreeMap::new();
        let mut represented = BTreeMap::new();
        let mut graph = LogGraph::new();
        for (k, v) in base.meta() {
            graph.set_meta(k.clone(), v.clone());
        }
        let mut supernodes = Vec::new();
        for cid in outermost {
            let node = tree.get(cid).expect("collapsed ids come from the tree");
            let members: BTreeSet<String> = tree
                .descendants(cid)
                .into_iter()
                .filter(|m| base.contains_entity(m))
                .collect();
            if members.is_empty() {
                continue;
            }
            let sid = supernode_id(cid);
            for m in &members {
                represented.insert(m.clone(), sid.clone());
            }
            supernodes.push(supernode_entity(&base, &sid, &node.label, &members));
            supernode_map.insert(sid, members);
        }
        for e in base.entities() {
            if !represented.contains_key(&e.id) {
                graph.add_entity(e.clone()).expect("base entities are valid");
            }
        }
        for s in supernodes {
            graph.add_entity(s).expect("supernode ids are reserved and unique");
        }

        let rep = |id: &str| represented.get(id).cloned();
        let mut hidden = BTreeSet::new();
        let mut aggregates: BTreeMap<AggregateKey, Vec<&Relationship>> = BTreeMap::new();
        for r in base.relationships() {
            match (rep(&r.source), rep(&r.target)) {
                (None, None) => graph.add_relationship(r.clone()).expect("base relationships are valid"),
                (a, b) => {
                    let src = a.unwrap_or_else(|| r.source.clone());
                    let tgt = b.unwrap_or_else(|| r.target.clone());
                    if src == tgt {
                        hidden.insert(r.id.clone());
                        continue;
                    }
                    let (src, tgt) = if !r.directed && tgt < src { (tgt, src) } else { (src, tgt) };
                    aggregates.entry((src, tgt, r.rel_type, r.directed)).or_default().push(r);
                }
            }
        }
        for ((src, tgt, rel_type, directed), parts) in aggregates {
            let mut id = format!("{AGGREGATE_PREFIX}{src}:{tgt}:{}", rel_type.as_str());
            if !directed {
                id.push_str(":u");
            }
            let mut agg = Relationship::new(id, src, tgt, rel_type).with_weight(parts.iter().map(|r| r.weight).sum());
            agg.directed = directed;
            agg.metadata.insert(
                AGGREGATED_FROM.into(),
                parts.iter().map(|r| r.id.as_str()).collect::<Vec<_>>().join(","),
            );
            graph.add_relationship(agg).expect("aggregate keys are unique");
        }
        graph.record_entity_types();

        ViewGraph {
            base,
            graph,
            supernode_map,
            hidden,
            collapsed,
            represented,
        }
    }
}

fn supernode_entity(base: &LogGraph, sid: &str, label: &str, members: &BTreeSet<String>) -> Entity {
    let ents: Vec<&Entity> = members.iter().filter_map(|m| base.entity(m)).collect();
    let ty = ents[0].entity_type;
    let entity_type = if ents.iter().all(|e| e.entity_type == ty) { ty } else { EntityType::Other };
    let mut tags = ents[0].tags.clone();
    for e in &ents[1..] {
        tags.retain(|t| e.tags.contains(t));
    }
    let mut e = Entity::new(sid, label, entity_type).with_role(format!("{} entities", ents.len()));
    e.tags = tags;
    e.style_hint = Some(StyleHint {
        shape: Shape::Diamond,
        size_class: SizeClass::Large,
        color_class: "cluster".into(),
        line_style: None,
    });
    e
}

/// Folds `cluster_id` into a supernode.
pub fn collapse(view: &ViewGraph, tree: &ClusterTree, cluster_id: &str) -> Result<ViewGraph, ClusterError> {
    if tree.get(cluster_id).is_none() {
        return Err(ClusterError::UnknownCluster(cluster_id.to_string()));
    }
    if view.collapsed.contains(cluster_id) {
        return Err(ClusterError::AlreadyCollapsed(cluster_id.to_string()));
    }
    let mut collapsed = view.collapsed.clone();
    collapsed.insert(cluster_id.to_string());
    Ok(ViewGraph::derive(view.base.clone(), tree, collapsed))
}

/// Inverse of [`collapse`]. Nested clusters keep their own state.
pub fn expand(view: &ViewGraph, tree: &ClusterTree, cluster_id: &str) -> Result<ViewGraph, ClusterError> {
    if tree.get(cluster_id).is_none() {
        return Err(ClusterError::UnknownCluster(cluster_id.to_string()));
    }
    if !view.collapsed.contains(cluster_id) {
        return Err(ClusterError::NotCollapsed(cluster_id.to_string()));
    }
    let mut collapsed = view.collapsed.clone();
    collapsed.remove(cluster_id);
    Ok(ViewGraph::derive(view.base.clone(), tree, collapsed))
}

/// Moves a layout from `old` to `new`. A new supernode starts at the
/// centroid of its members' previous positions and is pinned if any of them
/// was; entities released from a supernode start where it stood.
pub fn carry_layout(old: &ViewGraph, new: &ViewGraph, state: &mut LayoutState, p: &LayoutParams) {
    let mut pin = Vec::new();
    let mut place = BTreeMap::new();
    for id in new.graph.entity_ids() {
        if state.positions.contains_key(id) {
            continue;
        }
        if let Some(members) = new.supernode_map.get(id) {
            let olds: Vec<&str> = members.iter().map(|m| old.representative(m)).collect();
            let known: Vec<[f64; 2]> = olds.iter().filter_map(|o| state.position(o)).collect();
            if !known.is_empty() {
                let n = known.len() as f64;
                let sum = known.iter().fold([0.0, 0.0], |a, q| [a[0] + q[0], a[1] + q[1]]);
                place.insert(id.to_string(), [sum[0] / n, sum[1] / n]);
            }
            if olds.iter().any(|o| state.is_pinned(o)) {
                pin.push(id.to_string());
            }
        } else if let Some(q) = state.position(old.representative(id)) {
            place.insert(id.to_string(), q);
        }
    }
    state.reconcile(&new.graph, p, |id| place.get(id).copied());
    for id in pin {
        state.pinned.insert(id);
    }
}
