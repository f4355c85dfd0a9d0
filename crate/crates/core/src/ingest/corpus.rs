use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    decode_record, parse_json, read_file, BillIndex, Collector, DocumentRegistry, IngestError, IngestOptions, Violation,
    ViolationKind,
};
use crate::model::LogGraph;

/// Default heading pattern for blob corpora: `SEC. 1311. TITLE`.
/// Group 1 is the section number, group 2 the rest of the heading line.
pub const DEFAULT_SECTION_PATTERN: &str = r"(?m)^[ \t]*SEC\.[ \t]+([0-9]+[A-Za-z]*)\.[ \t]*(.*)$";

/// One section of bill text, the unit that gets chunked for search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSection {
    pub section_id: String,
    pub title: String,
    pub text: String,
    pub document_id: String,
    pub page: u32,
    /// Graph entities this section is about.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub linked_entities: BTreeSet<String>,
}

#[derive(Deserialize)]
struct RawSection {
    section_id: String,
    #[serde(default)]
    title: String,
    text: String,
    document_id: String,
    #[serde(default)]
    page: Option<u32>,
    #[serde(default)]
    linked_entities: BTreeSet<String>,
}

#[derive(Deserialize)]
struct RawBlob {
    document_id: String,
    text: String,
    #[serde(default)]
    section_pattern: Option<String>,
    #[serde(default)]
    linked_entities: BTreeMap<String, BTreeSet<String>>,
}

const SECTION_FIELDS: &[&str] = &["section_id", "title", "text", "document_id", "page", "linked_entities"];
const BLOB_FIELDS: &[&str] = &["document_id", "text", "section_pattern", "linked_entities"];

/// Splits a text blob on headings matched by `pattern`.
///
/// Returns `(section_id, title, body)` triples; ids are `SEC-<number>`.
/// Text before the first heading is discarded.
pub fn segment_text(text: &str, pattern: &Regex) -> Vec<(String, String, String)> {
    let heads: Vec<_> = pattern.captures_iter(text).collect();
    let mut out = Vec::with_capacity(heads.len());
    for (i, cap) in heads.iter().enumerate() {
        let whole = cap.get(0).expect("group 0 always matches");
        let end = heads
            .get(i + 1)
            .map(|n| n.get(0).expect("group 0").start())
            .unwrap_or(text.len());
        let number = cap.get(1).map(|m| m.as_str()).unwrap_or("");
        let title = cap.get(2).map(|m| m.as_str().trim()).unwrap_or("");
        let body = text[whole.end()..end].trim();
        out.push((format!("SEC-{number}"), title.to_string(), body.to_string()));
    }
    out
}

pub(super) fn load_corpus(
    path: &Path,
    options: &IngestOptions,
    graph: Option<&LogGraph>,
    bills: &BillIndex,
    registry: Option<&DocumentRegistry>,
    violations: &mut Vec<Violation>,
    warnings: &mut Vec<String>,
) -> Result<Vec<CorpusSection>, IngestError> {
    let text = read_file(path)?;
    let root: Value = parse_json(path, &text)?;
    let mut c = Collector::new(path, violations, warnings);

    let mut raws: Vec<(String, RawSection)> = Vec::new();
    match root {
        Value::Array(items) => {
            for (i, raw) in items.into_iter().enumerate() {
                let loc = match raw.get("section_id").and_then(Value::as_str) {
                    Some(id) => format!("sections[{i}] (id `{id}`)"),
                    None => format!("sections[{i}]"),
                };
                if let Some(s) = decode_record::<RawSection>(raw, SECTION_FIELDS, &loc, options.lenient, &mut c) {
                    raws.push((loc, s));
                }
            }
        }
        blob @ Value::Object(_) => {
            if let Some(b) = decode_record::<RawBlob>(blob, BLOB_FIELDS, "<blob>", options.lenient, &mut c) {
                let pattern = b
                    .section_pattern
                    .as_deref()
                    .or(options.section_pattern.as_deref())
                    .unwrap_or(DEFAULT_SECTION_PATTERN);
                match Regex::new(pattern) {
                    Err(e) => c.violation("<blob>", ViolationKind::Malformed, format!("bad section pattern: {e}")),
                    Ok(re) => {
                        let sections = segment_text(&b.text, &re);
                        if sections.is_empty() {
                            c.violation("<blob>", ViolationKind::Malformed, "no section headings matched");
                        }
                        for (id, title, body) in sections {
                            let linked = b.linked_entities.get(&id).cloned().unwrap_or_default();
                            raws.push((
                                format!("section `{id}`"),
                                RawSection {
                                    section_id: id,
                                    title,
                                    text: body,
                                    document_id: b.document_id.clone(),
                                    page: None,
                                    linked_entities: linked,
                                },
                            ));
                        }
                    }
                }
            }
        }
        _ => c.violation("<root>", ViolationKind::Malformed, "expected a list of sections or a text blob"),
    }

    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(raws.len());
    for (loc, raw) in raws {
        if !seen.insert(raw.section_id.clone()) {
            c.violation(&loc, ViolationKind::DuplicateId, format!("duplicate section id `{}`", raw.section_id));
        }
        if raw.text.trim().is_empty() {
            c.violation(&loc, ViolationKind::EmptyText, "section text is empty");
        }
        let page = match raw.page {
            Some(0) => {
                c.violation(&loc, ViolationKind::InvalidPage, "page must be >= 1");
                0
            }
            Some(p) => p,
            None => match bills.get(&raw.section_id).and_then(|b| b.page) {
                Some(p) => p,
                None => {
                    c.warn(&loc, "no page given, defaulting to page 1");
                    1
                }
            },
        };
        if let Some(reg) = registry {
            if !reg.contains_key(&raw.document_id) {
                c.violation(
                    &loc,
                    ViolationKind::UnresolvedDocument,
                    format!("unknown document `{}`", raw.document_id),
                );
            }
        }
        if let Some(g) = graph {
            for id in raw.linked_entities.iter().filter(|id| !g.contains_entity(id)) {
                c.violation(&loc, ViolationKind::UnknownEntity, format!("linked entity `{id}` does not exist"));
            }
        }
        out.push(CorpusSection {
            section_id: raw.section_id,
            title: raw.title,
            text: raw.text,
            document_id: raw.document_id,
            page,
            linked_entities: raw.linked_entities,
        });
    }
    Ok(out)
}
