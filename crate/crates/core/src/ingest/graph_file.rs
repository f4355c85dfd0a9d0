use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde_json::Value;

use super::{decode_record, parse_json, Collector, DocumentRegistry, IngestError, IngestOptions, Violation, ViolationKind};
use crate::model::{
    is_reserved_id, is_token, normalize_tags, Entity, LogGraph, Relationship, SCHEMA_KEY, SCHEMA_VERSION,
};

const TOP_FIELDS: &[&str] = &["meta", "entities", "relationships", "supernodes"];
const ENTITY_FIELDS: &[&str] = &[
    "id",
    "name",
    "entity_type",
    "role_description",
    "tags",
    "bill_refs",
    "style_hint",
];
const RELATIONSHIP_FIELDS: &[&str] = &["id", "source", "target", "rel_type", "directed", "weight", "metadata"];
const BILL_REF_FIELDS: &[&str] = &["bill_id", "document_id", "page"];
const STYLE_FIELDS: &[&str] = &["shape", "size_class", "color_class", "line_style"];

/// Meta key listing the allowed tags (comma-separated). Optional.
pub const TAG_VOCABULARY_KEY: &str = "tag_vocabulary";

fn strip_unknown(value: &mut Value, known: &[&str], location: &str, c: &mut Collector<'_>) {
    if let Some(obj) = value.as_object_mut() {
        let unknown: Vec<String> = obj.keys().filter(|k| !known.contains(&k.as_str())).cloned().collect();
        for k in unknown {
            obj.remove(&k);
            c.warn(location, format_args!("dropped unknown field `{k}`"));
        }
    }
}

fn record_location(kind: &str, index: usize, value: &Value) -> String {
    match value.get("id").and_then(Value::as_str) {
        Some(id) => format!("{kind}[{index}] (id `{id}`)"),
        None => format!("{kind}[{index}]"),
    }
}

/// Decodes and validates a `log-v1` document. `Ok(None)` means violations
/// were recorded; `Err` is reserved for unparseable JSON.
pub(super) fn decode_graph(
    path: &Path,
    text: &str,
    options: &IngestOptions,
    registry: Option<&DocumentRegistry>,
    violations: &mut Vec<Violation>,
    warnings: &mut Vec<String>,
) -> Result<Option<LogGraph>, IngestError> {
    let root: Value = parse_json(path, text)?;
    let before = violations.len();
    let mut c = Collector::new(path, violations, warnings);
    let lenient = options.lenient;

    let Value::Object(mut top) = root else {
        c.violation("<root>", ViolationKind::Malformed, "expected a JSON object");
        return Ok(None);
    };
    let unknown: Vec<String> = top.keys().filter(|k| !TOP_FIELDS.contains(&k.as_str())).cloned().collect();
    for k in unknown {
        if lenient {
            top.remove(&k);
            c.warn("<root>", format_args!("dropped unknown field `{k}`"));
        } else {
            c.violation("<root>", ViolationKind::UnknownField, format!("unknown field `{k}`"));
        }
    }

    // meta
    let mut meta = BTreeMap::new();
    match top.remove("meta") {
        Some(Value::Object(m)) => {
            for (k, v) in m {
                match v {
                    Value::String(s) => {
                        meta.insert(k, s);
                    }
                    other => c.violation(
                        format!("meta.{k}"),
                        ViolationKind::Malformed,
                        format!("meta values must be strings, found {other}"),
                    ),
                }
            }
            match meta.get(SCHEMA_KEY) {
                Some(v) if v == SCHEMA_VERSION => {}
                Some(v) => c.violation(
                    "meta.schema",
                    ViolationKind::SchemaVersion,
                    format!("unsupported schema `{v}`, expected `{SCHEMA_VERSION}`"),
                ),
                None => c.violation(
                    "meta",
                    ViolationKind::SchemaVersion,
                    format!("missing `{SCHEMA_KEY}: {SCHEMA_VERSION}`"),
                ),
            }
        }
        _ => c.violation("meta", ViolationKind::Malformed, "missing or non-object `meta`"),
    }

    let supernodes: BTreeMap<String, BTreeSet<String>> = match top.remove("supernodes") {
        None => BTreeMap::new(),
        Some(v) => serde_json::from_value(v).unwrap_or_else(|e| {
            c.violation("supernodes", ViolationKind::Malformed, e.to_string());
            BTreeMap::new()
        }),
    };

    let vocabulary: Option<BTreeSet<String>> = meta
        .get(TAG_VOCABULARY_KEY)
        .map(|v| normalize_tags(v.split(',')));

    // entities
    let mut entities = Vec::new();
    let mut entity_ids: HashSet<String> = HashSet::new();
    let mut entities_ok = true;
    match top.remove("entities") {
        Some(Value::Array(items)) => {
            for (i, mut raw) in items.into_iter().enumerate() {
                let loc = record_location("entities", i, &raw);
                if lenient {
                    strip_unknown_nested(&mut raw, &loc, &mut c);
                }
                let Some(mut e) = decode_record::<Entity>(raw, ENTITY_FIELDS, &loc, lenient, &mut c) else {
                    entities_ok = false;
                    continue;
                };
                let mut ok = true;
                let normalized = normalize_tags(&e.tags);
                if normalized != e.tags {
                    c.warn(&loc, "tags normalized to lowercase");
                    e.tags = normalized;
                }
                if !is_token(&e.id) {
                    ok = false;
                    if is_reserved_id(&e.id) {
                        if supernodes.contains_key(&e.id) {
                            ok = true;
                        } else {
                            c.violation(&loc, ViolationKind::ReservedId, format!("id `{}` uses the reserved `cluster:` namespace", e.id));
                        }
                    } else {
                        c.violation(&loc, ViolationKind::InvalidId, format!("id `{}` must match [A-Za-z0-9_-]+", e.id));
                    }
                }
                if !entity_ids.insert(e.id.clone()) {
                    ok = false;
                    c.violation(&loc, ViolationKind::DuplicateId, format!("duplicate entity id `{}`", e.id));
                }
                for b in &e.bill_refs {
                    if b.page == 0 {
                        ok = false;
                        c.violation(&loc, ViolationKind::InvalidPage, format!("bill `{}` has page 0", b.bill_id));
                    }
                    if let Some(reg) = registry {
                        match reg.get(&b.document_id) {
                            None => {
                                ok = false;
                                c.violation(
                                    &loc,
                                    ViolationKind::UnresolvedDocument,
                                    format!("bill `{}` cites unknown document `{}`", b.bill_id, b.document_id),
                                );
                            }
                            Some(doc) => {
                                if let Some(n) = doc.page_count.filter(|n| b.page > *n) {
                                    ok = false;
                                    c.violation(
                                        &loc,
                                        ViolationKind::InvalidPage,
                                        format!("bill `{}` page {} exceeds document page count {n}", b.bill_id, b.page),
                                    );
                                }
                            }
                        }
                    }
                }
                match &e.style_hint {
                    None => c.warn(&loc, "missing style hint"),
                    Some(h) if h.line_style.is_some() => c.warn(&loc, "line_style is ignored on entities"),
                    _ => {}
                }
                if e.name.trim().is_empty() {
                    c.warn(&loc, "empty name");
                }
                if let Some(vocab) = &vocabulary {
                    for t in e.tags.iter().filter(|t| !vocab.contains(*t)) {
                        c.warn(&loc, format_args!("unknown tag `{t}`"));
                    }
                }
                entities_ok &= ok;
                entities.push(e);
            }
        }
        _ => {
            entities_ok = false;
            c.violation("entities", ViolationKind::Malformed, "missing or non-array `entities`");
        }
    }

    for (id, members) in &supernodes {
        if !entity_ids.contains(id) {
            c.violation(format!("supernodes.{id}"), ViolationKind::UnknownEntity, format!("supernode `{id}` is not an entity"));
        }
        if members.is_empty() {
            c.violation(format!("supernodes.{id}"), ViolationKind::Malformed, "supernode has no members");
        }
    }

    // relationships
    let mut relationships = Vec::new();
    let mut rel_ids: HashSet<String> = HashSet::new();
    let mut triples: HashMap<(String, String, crate::model::RelType, bool), String> = HashMap::new();
    match top.remove("relationships") {
        Some(Value::Array(items)) => {
            for (i, raw) in items.into_iter().enumerate() {
                let loc = record_location("relationships", i, &raw);
                let Some(r) = decode_record::<Relationship>(raw, RELATIONSHIP_FIELDS, &loc, lenient, &mut c) else {
                    continue;
                };
                if !is_token(&r.id) && !(is_reserved_id(&r.id) && !supernodes.is_empty()) {
                    c.violation(&loc, ViolationKind::InvalidId, format!("id `{}` must match [A-Za-z0-9_-]+", r.id));
                }
                if !rel_ids.insert(r.id.clone()) {
                    c.violation(&loc, ViolationKind::DuplicateId, format!("duplicate relationship id `{}`", r.id));
                }
                if !(r.weight > 0.0 && r.weight.is_finite()) {
                    c.violation(&loc, ViolationKind::InvalidWeight, format!("weight {} must be > 0", r.weight));
                }
                let mut endpoints_ok = true;
                for endpoint in [&r.source, &r.target] {
                    if !entity_ids.contains(endpoint) {
                        endpoints_ok = false;
                        c.violation(
                            &loc,
                            ViolationKind::DanglingEndpoint,
                            format!("endpoint `{endpoint}` does not exist"),
                        );
                    }
                }
                if endpoints_ok {
                    if let Some(existing) = triples.get(&r.triple_key()) {
                        c.violation(
                            &loc,
                            ViolationKind::DuplicateTriple,
                            format!(
                                "duplicates `{existing}` ({} -> {}, {})",
                                r.source, r.target, r.rel_type
                            ),
                        );
                    } else {
                        triples.insert(r.triple_key(), r.id.clone());
                    }
                }
                relationships.push(r);
            }
        }
        _ => c.violation("relationships", ViolationKind::Malformed, "missing or non-array `relationships`"),
    }

    if violations.len() > before || !entities_ok {
        return Ok(None);
    }

    // Every invariant was checked above; a failure here would be a bug in
    // the checks, surfaced as a violation rather than a panic.
    let mut c = Collector::new(path, violations, warnings);
    match LogGraph::from_parts(meta, entities, relationships) {
        Ok(mut g) => {
            g.record_entity_types();
            Ok(Some(g))
        }
        Err(e) => {
            c.violation("<graph>", ViolationKind::Malformed, e.to_string());
            Ok(None)
        }
    }
}

fn strip_unknown_nested(raw: &mut Value, loc: &str, c: &mut Collector<'_>) {
    if let Some(refs) = raw.get_mut("bill_refs").and_then(Value::as_array_mut) {
        for b in refs {
            strip_unknown(b, BILL_REF_FIELDS, loc, c);
        }
    }
    if let Some(h) = raw.get_mut("style_hint") {
        strip_unknown(h, STYLE_FIELDS, loc, c);
    }
}
