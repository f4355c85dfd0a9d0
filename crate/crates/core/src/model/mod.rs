//! The legislative-organizational graph (LOG): typed entities, typed directed
//! relationships and the invariants that tie them together.
//!
//! A [`LogGraph`] is the unit every other module consumes. Mutation goes
//! through [`LogGraph::add_entity`] / [`LogGraph::add_relationship`] and the
//! cascading removals, each of which re-checks the invariant it could break.
//! Everything list-shaped comes out in a deterministic order so snapshots and
//! serialized documents are stable.

mod filter;
mod graph;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{filter_subgraph, FilterSpec};
pub use graph::{Direction, GraphDocument, LogGraph, SCHEMA_KEY, SCHEMA_VERSION};

/// Namespace reserved for aggregate (supernode) ids produced by clustering.
pub const SUPERNODE_PREFIX: &str = "cluster:";

/// True when `s` is a plain dataset token: `[A-Za-z0-9_-]+`.
pub fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// True when `s` may be used as an entity or relationship id inside a graph.
///
/// Plain tokens are always valid. Ids in the reserved `cluster:` namespace
/// (colon-separated tokens after the prefix) are also accepted so collapsed
/// views remain ordinary graphs; dataset ingestion rejects them.
pub fn is_valid_id(s: &str) -> bool {
    is_token(s) || is_reserved_id(s)
}

/// True for ids in the reserved `cluster:` namespace.
pub fn is_reserved_id(s: &str) -> bool {
    s.strip_prefix(SUPERNODE_PREFIX)
        .is_some_and(|rest| !rest.is_empty() && rest.split(':').all(is_token))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("invalid id `{0}`: ids must match [A-Za-z0-9_-]+")]
    InvalidId(String),
    #[error("relationship endpoint `{0}` does not exist")]
    DanglingEndpoint(String),
    #[error("relationship `{id}` has non-positive weight {weight}")]
    InvalidWeight { id: String, weight: f64 },
    #[error("relationship `{id}` duplicates `{existing}` ({from} -> {to}, {rel_type})")]
    DuplicateTriple {
        id: String,
        existing: String,
        from: String,
        to: String,
        rel_type: RelType,
    },
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown relationship `{0}`")]
    UnknownRelationship(String),
    #[error("entity `{id}` has tag `{tag}` that is not lowercase and trimmed")]
    InvalidTag { id: String, tag: String },
    #[error("entity `{id}` references bill `{bill_id}` with page 0")]
    InvalidPage { id: String, bill_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityType {
    FederalAgency,
    StateAgency,
    Regulator,
    Insurer,
    Provider,
    Program,
    Fund,
    Individual,
    Study,
    Other,
}

impl EntityType {
    pub const ALL: [EntityType; 10] = [
        EntityType::FederalAgency,
        EntityType::StateAgency,
        EntityType::Regulator,
        EntityType::Insurer,
        EntityType::Provider,
        EntityType::Program,
        EntityType::Fund,
        EntityType::Individual,
        EntityType::Study,
        EntityType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::FederalAgency => "federal_agency",
            EntityType::StateAgency => "state_agency",
            EntityType::Regulator => "regulator",
            EntityType::Insurer => "insurer",
            EntityType::Provider => "provider",
            EntityType::Program => "program",
            EntityType::Fund => "fund",
            EntityType::Individual => "individual",
            EntityType::Study => "study",
            EntityType::Other => "other",
        }
    }

    /// Human-readable plural label, used for type clusters.
    pub fn label(self) -> &'static str {
        match self {
            EntityType::FederalAgency => "Federal agencies",
            EntityType::StateAgency => "State agencies",
            EntityType::Regulator => "Regulators",
            EntityType::Insurer => "Insurers",
            EntityType::Provider => "Providers",
            EntityType::Program => "Programs",
            EntityType::Fund => "Funds",
            EntityType::Individual => "Individuals",
            EntityType::Study => "Studies",
            EntityType::Other => "Other entities",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelType {
    Regulatory,
    Funding,
    Partnership,
    Oversight,
    Reporting,
    Other,
}

impl RelType {
    pub const ALL: [RelType; 6] = [
        RelType::Regulatory,
        RelType::Funding,
        RelType::Partnership,
        RelType::Oversight,
        RelType::Reporting,
        RelType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelType::Regulatory => "regulatory",
            RelType::Funding => "funding",
            RelType::Partnership => "partnership",
            RelType::Oversight => "oversight",
            RelType::Reporting => "reporting",
            RelType::Other => "other",
        }
    }

    /// Default stroke for edges of this type.
    pub fn default_line_style(self) -> LineStyle {
        match self {
            RelType::Funding => LineStyle::Dashed,
            RelType::Partnership => LineStyle::Dotted,
            _ => LineStyle::Solid,
        }
    }
}

// Ordered by wire name so neighbor lists sort the way they read.
impl Ord for RelType {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl PartialOrd for RelType {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for RelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Circle,
    Square,
    Diamond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineStyle {
    Solid,
    Dashed,
    Dotted,
}

/// Rendering metadata attached to an entity (shape/size/color) or a
/// relationship (line style).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleHint {
    pub shape: Shape,
    pub size_class: SizeClass,
    pub color_class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_style: Option<LineStyle>,
}

/// Pointer from an entity to the legislative text that creates it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BillRef {
    pub bill_id: String,
    pub document_id: String,
    pub page: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub entity_type: EntityType,
    #[serde(default)]
    pub role_description: String,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    #[serde(default)]
    pub bill_refs: Vec<BillRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_hint: Option<StyleHint>,
}

impl Entity {
    pub fn new(id: impl Into<String>, name: impl Into<String>, entity_type: EntityType) -> Self {
        Entity {
            id: id.into(),
            name: name.into(),
            entity_type,
            role_description: String::new(),
            tags: BTreeSet::new(),
            bill_refs: Vec::new(),
            style_hint: None,
        }
    }

    pub fn with_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.tags.extend(normalize_tags(tags));
        self
    }

    pub fn with_role(mut self, role: impl Into<String>) -> Self {
        self.role_description = role.into();
        self
    }

    pub fn with_bill_ref(mut self, bill_ref: BillRef) -> Self {
        self.bill_refs.push(bill_ref);
        self
    }
}

fn default_true() -> bool {
    true
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relationship {
    pub id: String,
    pub source: String,
    pub target: String,
    pub rel_type: RelType,
    #[serde(default = "default_true")]
    pub directed: bool,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl Relationship {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        target: impl Into<String>,
        rel_type: RelType,
    ) -> Self {
        Relationship {
            id: id.into(),
            source: source.into(),
            target: target.into(),
            rel_type,
            directed: true,
            weight: 1.0,
            metadata: BTreeMap::new(),
        }
    }

    pub fn undirected(mut self) -> Self {
        self.directed = false;
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    /// Stroke to render this edge with.
    pub fn line_style(&self) -> LineStyle {
        self.rel_type.default_line_style()
    }

    /// Identity used for duplicate detection: undirected pairs are unordered.
    pub(crate) fn triple_key(&self) -> (String, String, RelType, bool) {
        if !self.directed && self.target < self.source {
            (self.target.clone(), self.source.clone(), self.rel_type, false)
        } else {
            (self.source.clone(), self.target.clone(), self.rel_type, self.directed)
        }
    }

    /// The endpoint opposite `id`, if `id` is an endpoint.
    pub fn other_endpoint(&self, id: &str) -> Option<&str> {
        if self.source == id {
            Some(&self.target)
        } else if self.target == id {
            Some(&self.source)
        } else {
            None
        }
    }
}

/// Lowercase, trim and deduplicate tags, dropping empty strings.
pub fn normalize_tags<I, S>(raw: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    raw.into_iter()
        .map(|t| t.as_ref().trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}
