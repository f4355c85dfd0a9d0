use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{decode_record, parse_json, read_file, Collector, IngestError, IngestOptions, Violation, ViolationKind};

/// A registered source document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentEntry {
    /// Absolute URL, or a path relative to the documents directory.
    pub uri: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_count: Option<u32>,
}

impl DocumentEntry {
    pub fn is_absolute_url(&self) -> bool {
        self.uri.contains("://")
    }
}

/// document_id → document.
pub type DocumentRegistry = BTreeMap<String, DocumentEntry>;

/// Where a bill is discussed. `page` is `None` when the mapping omitted it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BillLocation {
    pub document_id: String,
    #[serde(default)]
    pub page: Option<u32>,
}

/// bill_id → location.
pub type BillIndex = BTreeMap<String, BillLocation>;

/// A bill id resolved to a concrete document and page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedBill {
    pub bill_id: String,
    pub document_id: String,
    pub uri: String,
    pub title: String,
    pub page: u32,
}

const DOCUMENT_FIELDS: &[&str] = &["uri", "title", "page_count"];
const LOCATION_FIELDS: &[&str] = &["document_id", "page"];

fn entries(path: &Path, c: &mut Collector<'_>) -> Result<Vec<(String, Value)>, IngestError> {
    let text = read_file(path)?;
    let root: Value = parse_json(path, &text)?;
    match root {
        Value::Object(m) => Ok(m.into_iter().collect()),
        _ => {
            c.violation("<root>", ViolationKind::Malformed, "expected a JSON object keyed by id");
            Ok(Vec::new())
        }
    }
}

pub(super) fn load_registry(
    path: &Path,
    options: &IngestOptions,
    violations: &mut Vec<Violation>,
    warnings: &mut Vec<String>,
) -> Result<DocumentRegistry, IngestError> {
    let mut c = Collector::new(path, violations, warnings);
    let mut out = DocumentRegistry::new();
    for (id, raw) in entries(path, &mut c)? {
        let loc = format!("document `{id}`");
        if let Some(doc) = decode_record::<DocumentEntry>(raw, DOCUMENT_FIELDS, &loc, options.lenient, &mut c) {
            if doc.uri.trim().is_empty() {
                c.violation(&loc, ViolationKind::Malformed, "empty uri");
            }
            if doc.page_count == Some(0) {
                c.violation(&loc, ViolationKind::InvalidPage, "page_count must be positive");
            }
            out.insert(id, doc);
        }
    }
    Ok(out)
}

pub(super) fn load_bill_index(
    path: &Path,
    options: &IngestOptions,
    registry: Option<&DocumentRegistry>,
    violations: &mut Vec<Violation>,
    warnings: &mut Vec<String>,
) -> Result<BillIndex, IngestError> {
    let mut c = Collector::new(path, violations, warnings);
    let mut out = BillIndex::new();
    for (bill_id, raw) in entries(path, &mut c)? {
        let loc = format!("bill `{bill_id}`");
        let Some(mut location) = decode_record::<BillLocation>(raw, LOCATION_FIELDS, &loc, options.lenient, &mut c) else {
            continue;
        };
        match location.page {
            None => {
                c.warn(&loc, "no page given, defaulting to page 1");
                location.page = Some(1);
            }
            Some(0) => c.violation(&loc, ViolationKind::InvalidPage, "page must be >= 1"),
            Some(_) => {}
        }
        if let Some(reg) = registry {
            match reg.get(&location.document_id) {
                None => c.violation(
                    &loc,
                    ViolationKind::UnresolvedDocument,
                    format!("unknown document `{}`", location.document_id),
                ),
                Some(doc) => {
                    if let (Some(n), Some(p)) = (doc.page_count, location.page) {
                        if p > n {
                            c.violation(&loc, ViolationKind::InvalidPage, format!("page {p} exceeds page count {n}"));
                        }
                    }
                }
            }
        }
        out.insert(bill_id, location);
    }
    Ok(out)
}
