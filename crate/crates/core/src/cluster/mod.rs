//! Hierarchical grouping of entities into collapsible supernodes.
//!
//! A [`ClusterTree`] is built once per dataset. Views are derived from the
//! base graph plus the set of collapsed cluster ids, so collapsing and
//! expanding are pure functions and expanding exactly restores the previous
//! view.

mod view;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{is_token, EntityType, LogGraph, SUPERNODE_PREFIX};

pub use view::{carry_layout, collapse, expand, ViewGraph, AGGREGATE_PREFIX};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("unknown cluster `{0}`")]
    UnknownCluster(String),
    #[error("cluster `{0}` is already collapsed")]
    AlreadyCollapsed(String),
    #[error("cluster `{0}` is not collapsed")]
    NotCollapsed(String),
    #[error("invalid grouping file: {0}")]
    InvalidGroupingFile(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub cluster_id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    /// Child cluster ids.
    pub clusters: Vec<String>,
    /// Entities placed directly in this cluster.
    pub members: Vec<String>,
}

impl ClusterNode {
    fn new(cluster_id: impl Into<String>, label: impl Into<String>) -> Self {
        ClusterNode {
            cluster_id: cluster_id.into(),
            label: label.into(),
            parent: None,
            clusters: Vec::new(),
            members: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn supernode_id(&self) -> String {
        supernode_id(&self.cluster_id)
    }
}

pub fn supernode_id(cluster_id: &str) -> String {
    format!("{SUPERNODE_PREFIX}{cluster_id}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "strategy")]
pub enum ClusterStrategy {
    ByEntityType,
    ByTag { tag_key: String },
    Manual { groups: GroupingFile },
}

/// Entry of a manual grouping file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub label: String,
    #[serde(default)]
    pub members: Vec<String>,
    #[serde(default)]
    pub parent: Option<String>,
}

pub type GroupingFile = BTreeMap<String, GroupSpec>;

pub fn parse_grouping_file(text: &str) -> Result<GroupingFile, ClusterError> {
    serde_json::from_str(text).map_err(|e| ClusterError::InvalidGroupingFile(e.to_string()))
}

/// A forest of clusters. Every entity of the graph it was built from is a
/// member of exactly one cluster.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClusterTree {
    pub nodes: BTreeMap<String, ClusterNode>,
    pub roots: Vec<String>,
}

fn token_fragment(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

impl ClusterTree {
    pub fn get(&self, cluster_id: &str) -> Option<&ClusterNode> {
        self.nodes.get(cluster_id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Cluster ids from `cluster_id` up to its root, starting with itself.
    pub fn ancestors<'a>(&'a self, cluster_id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        std::iter::successors(self.nodes.get(cluster_id), |n| n.parent.as_deref().and_then(|p| self.nodes.get(p)))
            .map(|n| n.cluster_id.as_str())
    }

    /// Every entity under `cluster_id`, including nested clusters.
    pub fn descendants(&self, cluster_id: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![cluster_id];
        while let Some(c) = stack.pop() {
            if let Some(n) = self.nodes.get(c) {
                out.extend(n.members.iter().cloned());
                stack.extend(n.clusters.iter().map(String::as_str));
            }
        }
        out
    }

    /// entity id → the cluster it is a direct member of.
    pub fn membership(&self) -> BTreeMap<&str, &str> {
        self.nodes
            .values()
            .flat_map(|n| n.members.iter().map(move |m| (m.as_str(), n.cluster_id.as_str())))
            .collect()
    }

    fn insert(&mut self, node: ClusterNode) {
        self.nodes.insert(node.cluster_id.clone(), node);
    }

    /// Recomputes `roots` and each node's `clusters` list from the parents.
    fn link(&mut self) {
        let parents: Vec<(String, Option<String>)> =
            self.nodes.values().map(|n| (n.cluster_id.clone(), n.parent.clone())).collect();
        for n in self.nodes.values_mut() {
            n.clusters.clear();
            n.members.sort();
        }
        self.roots.clear();
        for (id, parent) in parents {
            match parent {
                Some(p) => self.nodes.get_mut(&p).expect("parent checked").clusters.push(id),
                None => self.roots.push(id),
            }
        }
    }

    fn add_singletons(&mut self, g: &LogGraph) {
        let placed: BTreeSet<String> = self.membership().keys().map(|s| s.to_string()).collect();
        for e in g.entities() {
            if !placed.contains(&e.id) {
                let mut node = ClusterNode::new(format!("solo-{}", e.id), e.name.clone());
                node.members.push(e.id.clone());
                self.insert(node);
            }
        }
    }

    /// Checks the forest and partition invariants against `g`.
    pub fn check(&self, g: &LogGraph) -> Result<(), ClusterError> {
        let bad = |m: String| Err(ClusterError::InvalidGroupingFile(m));
        let mut seen = BTreeSet::new();
        for n in self.nodes.values() {
            if n.members.is_empty() && n.clusters.is_empty() {
                return bad(format!("cluster `{}` is empty", n.cluster_id));
            }
            for m in &n.members {
                if !g.contains_entity(m) {
                    return bad(format!("cluster `{}` lists unknown entity `{m}`", n.cluster_id));
                }
                if !seen.insert(m.as_str()) {
                    return bad(format!("entity `{m}` belongs to more than one cluster"));
                }
            }
        }
        if seen.len() != g.entity_count() {
            return bad("some entities belong to no cluster".into());
        }
        for id in self.nodes.keys() {
            if self.ancestors(id).take(self.nodes.len() + 1).count() > self.nodes.len() {
                return bad(format!("cluster `{id}` is part of a parent cycle"));
            }
        }
        Ok(())
    }
}

/// Builds the cluster forest for `g`. Entities no group claims become
/// singleton clusters at the root.
pub fn build_cluster_tree(g: &LogGraph, strategy: &ClusterStrategy) -> Result<ClusterTree, ClusterError> {
    let mut tree = ClusterTree::default();
    match strategy {
        ClusterStrategy::ByEntityType => {
            let mut by_type: BTreeMap<EntityType, Vec<String>> = BTreeMap::new();
            for e in g.entities() {
                by_type.entry(e.entity_type).or_default().push(e.id.clone());
            }
            for (ty, members) in by_type {
                let mut node = ClusterNode::new(format!("type-{}", ty.as_str()), ty.label());
                node.members = members;
                tree.insert(node);
            }
        }
        ClusterStrategy::ByTag { tag_key } => {
            let key = tag_key.trim().to_lowercase();
            if key.is_empty() {
                return Err(ClusterError::InvalidGroupingFile("tag key is empty".into()));
            }
            let parent_id = format!("tag-{}", token_fragment(&key));
            let prefix = format!("{key}:");
            let mut values: BTreeMap<String, (String, Vec<String>)> = BTreeMap::new();
            let mut plain = Vec::new();
            for e in g.entities() {
                // A plain `key` tag sorts before any `key:value` tag, so an
                // entity carrying both lands in the parent cluster.
                let choice = e.tags.iter().find_map(|t| {
                    if *t == key {
                        Some(None)
                    } else {
                        t.strip_prefix(&prefix).filter(|v| !v.is_empty()).map(Some)
                    }
                });
                match choice {
                    Some(None) => plain.push(e.id.clone()),
                    Some(Some(v)) => {
                        let cid = format!("{parent_id}-{}", token_fragment(v));
                        values.entry(cid).or_insert_with(|| (v.to_string(), Vec::new())).1.push(e.id.clone());
                    }
                    None => {}
                }
            }
            if !plain.is_empty() || !values.is_empty() {
                let mut parent = ClusterNode::new(parent_id.clone(), key.clone());
                parent.members = plain;
                tree.insert(parent);
                for (cid, (label, members)) in values {
                    let mut node = ClusterNode::new(cid, label);
                    node.parent = Some(parent_id.clone());
                    node.members = members;
                    tree.insert(node);
                }
            }
        }
        ClusterStrategy::Manual { groups } => {
            for (cid, spec) in groups {
                if !is_token(cid) {
                    return Err(ClusterError::InvalidGroupingFile(format!("cluster id `{cid}` must match [A-Za-z0-9_-]+")));
                }
                if let Some(p) = &spec.parent {
                    if !groups.contains_key(p) {
                        return Err(ClusterError::InvalidGroupingFile(format!("cluster `{cid}` has unknown parent `{p}`")));
                    }
                }
                let mut node = ClusterNode::new(cid.clone(), spec.label.clone());
                node.parent = spec.parent.clone();
                node.members = spec.members.clone();
                tree.insert(node);
            }
            // Cycle check before linking so `ancestors` terminates quickly.
            for cid in groups.keys() {
                if tree.ancestors(cid).take(groups.len() + 1).count() > groups.len() {
                    return Err(ClusterError::InvalidGroupingFile(format!("cluster `{cid}` is part of a parent cycle")));
                }
            }
        }
    }
    tree.add_singletons(g);
    tree.link();
    tree.check(g)?;
    Ok(tree)
}
