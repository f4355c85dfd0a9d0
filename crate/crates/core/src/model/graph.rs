use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{is_valid_id, Entity, ModelError, RelType, Relationship};

/// Meta key holding the dataset schema version.
pub const SCHEMA_KEY: &str = "schema";
/// The only schema version this crate reads and writes.
pub const SCHEMA_VERSION: &str = "log-v1";
/// Meta key recording the entity types present in the graph.
pub const ENTITY_TYPES_KEY: &str = "entity_types";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    In,
    Out,
    Both,
}

/// The canonical on-disk shape of a graph (`log-v1`).
///
/// `supernodes` is only present for collapsed views: it maps each aggregate
/// id to the original entity ids it stands in for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub meta: BTreeMap<String, String>,
    pub entities: Vec<Entity>,
    pub relationships: Vec<Relationship>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub supernodes: BTreeMap<String, BTreeSet<String>>,
}

type TripleKey = (String, String, RelType, bool);

/// Directed, heterogeneous graph of entities and relationships.
///
/// Entity and relationship ids live in separate namespaces. The incidence
/// index and the triple index are derived data kept in step with the maps.
#[derive(Debug, Clone, PartialEq)]
pub struct LogGraph {
    entities: BTreeMap<String, Entity>,
    relationships: BTreeMap<String, Relationship>,
    meta: BTreeMap<String, String>,
    incident: BTreeMap<String, BTreeSet<String>>,
    triples: BTreeMap<TripleKey, String>,
}

impl Default for LogGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl LogGraph {
    pub fn new() -> Self {
        let mut meta = BTreeMap::new();
        meta.insert(SCHEMA_KEY.to_string(), SCHEMA_VERSION.to_string());
        LogGraph {
            entities: BTreeMap::new(),
            relationships: BTreeMap::new(),
            meta,
            incident: BTreeMap::new(),
            triples: BTreeMap::new(),
        }
    }

    /// Builds a graph from parts, failing on the first invariant violation.
    pub fn from_parts(
        meta: BTreeMap<String, String>,
        entities: impl IntoIterator<Item = Entity>,
        relationships: impl IntoIterator<Item = Relationship>,
    ) -> Result<Self, ModelError> {
        let mut g = LogGraph::new();
        g.meta.extend(meta);
        for e in entities {
            g.add_entity(e)?;
        }
        for r in relationships {
            g.add_relationship(r)?;
        }
        Ok(g)
    }

    pub fn from_document(doc: GraphDocument) -> Result<Self, ModelError> {
        Self::from_parts(doc.meta, doc.entities, doc.relationships)
    }

    pub fn to_document(&self) -> GraphDocument {
        let mut meta = self.meta.clone();
        meta.insert(SCHEMA_KEY.to_string(), SCHEMA_VERSION.to_string());
        GraphDocument {
            meta,
            entities: self.entities.values().cloned().collect(),
            relationships: self.relationships.values().cloned().collect(),
            supernodes: BTreeMap::new(),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("graph documents always serialize")
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relationship_count(&self) -> usize {
        self.relationships.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Entities in id order.
    pub fn entities(&self) -> impl ExactSizeIterator<Item = &Entity> + Clone {
        self.entities.values()
    }

    /// Relationships in id order.
    pub fn relationships(&self) -> impl ExactSizeIterator<Item = &Relationship> + Clone {
        self.relationships.values()
    }

    pub fn entity_ids(&self) -> impl ExactSizeIterator<Item = &str> + Clone {
        self.entities.keys().map(String::as_str)
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn relationship(&self, id: &str) -> Option<&Relationship> {
        self.relationships.get(id)
    }

    pub fn contains_entity(&self, id: &str) -> bool {
        self.entities.contains_key(id)
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.insert(key.into(), value.into());
    }

    /// Records the sorted, comma-joined set of entity types present.
    pub fn record_entity_types(&mut self) {
        let types: BTreeSet<&str> = self.entities.values().map(|e| e.entity_type.as_str()).collect();
        let joined = types.into_iter().collect::<Vec<_>>().join(",");
        self.meta.insert(ENTITY_TYPES_KEY.to_string(), joined);
    }

    pub fn validate_entity(&self, e: &Entity) -> Result<(), ModelError> {
        if !is_valid_id(&e.id) {
            return Err(ModelError::InvalidId(e.id.clone()));
        }
        if self.entities.contains_key(&e.id) {
            return Err(ModelError::DuplicateId(e.id.clone()));
        }
        if let Some(tag) = e
            .tags
            .iter()
            .find(|t| t.is_empty() || t.trim() != t.as_str() || t.to_lowercase() != **t)
        {
            return Err(ModelError::InvalidTag {
                id: e.id.clone(),
                tag: tag.clone(),
            });
        }
        if let Some(b) = e.bill_refs.iter().find(|b| b.page == 0) {
            return Err(ModelError::InvalidPage {
                id: e.id.clone(),
                bill_id: b.bill_id.clone(),
            });
        }
        Ok(())
    }

    pub fn add_entity(&mut self, e: Entity) -> Result<(), ModelError> {
        self.validate_entity(&e)?;
        self.incident.insert(e.id.clone(), BTreeSet::new());
        self.entities.insert(e.id.clone(), e);
        Ok(())
    }

    pub fn validate_relationship(&self, r: &Relationship) -> Result<(), ModelError> {
        if !is_valid_id(&r.id) {
            return Err(ModelError::InvalidId(r.id.clone()));
        }
        if self.relationships.contains_key(&r.id) {
            return Err(ModelError::DuplicateId(r.id.clone()));
        }
        if !(r.weight > 0.0 && r.weight.is_finite()) {
            return Err(ModelError::InvalidWeight {
                id: r.id.clone(),
                weight: r.weight,
            });
        }
        for endpoint in [&r.source, &r.target] {
            if !self.entities.contains_key(endpoint) {
                return Err(ModelError::DanglingEndpoint(endpoint.clone()));
            }
        }
        if let Some(existing) = self.triples.get(&r.triple_key()) {
            return Err(ModelError::DuplicateTriple {
                id: r.id.clone(),
                existing: existing.clone(),
                from: r.source.clone(),
                to: r.target.clone(),
                rel_type: r.rel_type,
            });
        }
        Ok(())
    }

    pub fn add_relationship(&mut self, r: Relationship) -> Result<(), ModelError> {
        self.validate_relationship(&r)?;
        self.triples.insert(r.triple_key(), r.id.clone());
        for endpoint in [&r.source, &r.target] {
            self.incident
                .get_mut(endpoint)
                .expect("endpoint checked above")
                .insert(r.id.clone());
        }
        self.relationships.insert(r.id.clone(), r);
        Ok(())
    }

    pub fn remove_relationship(&mut self, id: &str) -> Result<Relationship, ModelError> {
        let r = self
            .relationships
            .remove(id)
            .ok_or_else(|| ModelError::UnknownRelationship(id.to_string()))?;
        self.triples.remove(&r.triple_key());
        for endpoint in [&r.source, &r.target] {
            if let Some(set) = self.incident.get_mut(endpoint) {
                set.remove(id);
            }
        }
        Ok(r)
    }

    /// Removes an entity together with every relationship touching it.
    pub fn remove_entity(&mut self, id: &str) -> Result<(Entity, Vec<Relationship>), ModelError> {
        let incident = self
            .incident
            .get(id)
            .cloned()
            .ok_or_else(|| ModelError::UnknownEntity(id.to_string()))?;
        let mut removed = Vec::with_capacity(incident.len());
        for rid in incident {
            removed.push(self.remove_relationship(&rid)?);
        }
        self.incident.remove(id);
        let e = self.entities.remove(id).expect("incidence and entity maps agree");
        Ok((e, removed))
    }

    /// Relationships touching `id` in the requested direction, paired with the
    /// entity on the other end, sorted by (rel_type, relationship id).
    ///
    /// Undirected relationships count as both incoming and outgoing.
    pub fn neighbors(
        &self,
        id: &str,
        direction: Direction,
    ) -> Result<Vec<(&Entity, &Relationship)>, ModelError> {
        let incident = self
            .incident
            .get(id)
            .ok_or_else(|| ModelError::UnknownEntity(id.to_string()))?;
        let mut out: Vec<(&Entity, &Relationship)> = incident
            .iter()
            .map(|rid| &self.relationships[rid])
            .filter(|r| {
                let outgoing = r.source == id || (!r.directed && r.target == id);
                let incoming = r.target == id || (!r.directed && r.source == id);
                match direction {
                    Direction::Out => outgoing,
                    Direction::In => incoming,
                    Direction::Both => outgoing || incoming,
                }
            })
            .map(|r| {
                let other = r.other_endpoint(id).expect("incident relationship");
                (&self.entities[other], r)
            })
            .collect();
        out.sort_by(|a, b| (a.1.rel_type, &a.1.id).cmp(&(b.1.rel_type, &b.1.id)));
        Ok(out)
    }

    /// Ids of every relationship touching `id`, in id order.
    pub fn incident_relationship_ids(&self, id: &str) -> impl Iterator<Item = &str> {
        self.incident
            .get(id)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    /// Total weight over all relationships.
    pub fn total_weight(&self) -> f64 {
        self.relationships.values().map(|r| r.weight).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntityType, RelType};

    fn pair() -> LogGraph {
        let mut g = LogGraph::new();
        g.add_entity(Entity::new("HHS", "Department of Health and Human Services", EntityType::FederalAgency))
            .unwrap();
        g.add_entity(Entity::new("Exchange", "Government Health Benefit Exchanges", EntityType::Program))
            .unwrap();
        g
    }

    #[test]
    fn add_entity_examples() {
        let mut g = LogGraph::new();
        g.add_entity(Entity::new("CMS", "Centers for Medicare and Medicaid Services", EntityType::FederalAgency))
            .unwrap();
        assert_eq!(g.entity_count(), 1);
        let dup = g.add_entity(Entity::new("CMS", "again", EntityType::Other));
        assert_eq!(dup, Err(ModelError::DuplicateId("CMS".into())));
        let bad = g.add_entity(Entity::new("a b", "spaced", EntityType::Other));
        assert_eq!(bad, Err(ModelError::InvalidId("a b".into())));
        assert_eq!(g.entity_count(), 1);
    }

    #[test]
    fn add_relationship_examples() {
        let mut g = pair();
        g.add_relationship(Relationship::new("r1", "HHS", "Exchange", RelType::Regulatory))
            .unwrap();
        assert_eq!(g.relationship_count(), 1);

        let mut empty = LogGraph::new();
        let err = empty.add_relationship(Relationship::new("r", "X", "Y", RelType::Other));
        assert_eq!(err, Err(ModelError::DanglingEndpoint("X".into())));

        let zero = g.add_relationship(
            Relationship::new("r2", "HHS", "Exchange", RelType::Funding).with_weight(0.0),
        );
        assert!(matches!(zero, Err(ModelError::InvalidWeight { .. })));
    }

    #[test]
    fn parallel_edges_need_distinct_types() {
        let mut g = pair();
        g.add_relationship(Relationship::new("r1", "HHS", "Exchange", RelType::Regulatory))
            .unwrap();
        g.add_relationship(Relationship::new("r2", "HHS", "Exchange", RelType::Funding))
            .unwrap();
        let dup = g.add_relationship(Relationship::new("r3", "HHS", "Exchange", RelType::Funding));
        assert!(matches!(dup, Err(ModelError::DuplicateTriple { .. })));
        // reverse direction of a directed edge is a different triple
        g.add_relationship(Relationship::new("r4", "Exchange", "HHS", RelType::Funding))
            .unwrap();
    }

    #[test]
    fn undirected_triples_are_unordered() {
        let mut g = pair();
        g.add_relationship(Relationship::new("r1", "HHS", "Exchange", RelType::Partnership).undirected())
            .unwrap();
        let dup = g.add_relationship(
            Relationship::new("r2", "Exchange", "HHS", RelType::Partnership).undirected(),
        );
        assert!(matches!(dup, Err(ModelError::DuplicateTriple { .. })));
    }

    #[test]
    fn neighbors_directions() {
        let mut g = pair();
        g.add_entity(Entity::new("Lonely", "Lonely", EntityType::Other)).unwrap();
        g.add_relationship(Relationship::new("r1", "HHS", "Exchange", RelType::Regulatory))
            .unwrap();
        g.add_relationship(Relationship::new("r0", "Exchange", "HHS", RelType::Reporting))
            .unwrap();
        g.add_relationship(Relationship::new("r2", "HHS", "Exchange", RelType::Partnership).undirected())
            .unwrap();

        let out: Vec<_> = g.neighbors("HHS", Direction::Out).unwrap().iter().map(|(_, r)| r.id.clone()).collect();
        assert_eq!(out, ["r2", "r1"]);
        let inc: Vec<_> = g.neighbors("HHS", Direction::In).unwrap().iter().map(|(_, r)| r.id.clone()).collect();
        assert_eq!(inc, ["r2", "r0"]);
        let both: Vec<_> = g.neighbors("HHS", Direction::Both).unwrap().iter().map(|(_, r)| r.id.clone()).collect();
        assert_eq!(both, ["r2", "r1", "r0"]);
        assert!(g.neighbors("Lonely", Direction::Both).unwrap().is_empty());
        assert_eq!(
            g.neighbors("Nope", Direction::Both).unwrap_err(),
            ModelError::UnknownEntity("Nope".into())
        );
    }

    #[test]
    fn remove_entity_cascades() {
        let mut g = pair();
        g.add_relationship(Relationship::new("r1", "HHS", "Exchange", RelType::Regulatory))
            .unwrap();
        let (e, removed) = g.remove_entity("HHS").unwrap();
        assert_eq!(e.id, "HHS");
        assert_eq!(removed.len(), 1);
        assert_eq!(g.relationship_count(), 0);
        assert!(g.neighbors("Exchange", Direction::Both).unwrap().is_empty());
        // the triple is free again once its relationship is gone
        g.add_entity(Entity::new("HHS", "HHS", EntityType::FederalAgency)).unwrap();
        g.add_relationship(Relationship::new("r9", "HHS", "Exchange", RelType::Regulatory))
            .unwrap();
    }

    #[test]
    fn document_round_trip() {
        let mut g = pair();
        g.add_relationship(Relationship::new("r1", "HHS", "Exchange", RelType::Regulatory))
            .unwrap();
        g.set_meta("title", "pair");
        let doc: GraphDocument = serde_json::from_str(&g.to_json_pretty()).unwrap();
        assert_eq!(doc.meta[SCHEMA_KEY], SCHEMA_VERSION);
        assert_eq!(LogGraph::from_document(doc).unwrap(), g);
    }

    #[test]
    fn tags_must_be_normalized() {
        let mut g = LogGraph::new();
        let mut e = Entity::new("x", "x", EntityType::Other);
        e.tags.insert("Medicaid".into());
        assert!(matches!(g.add_entity(e), Err(ModelError::InvalidTag { .. })));
    }
}
