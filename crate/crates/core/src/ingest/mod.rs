//! Loading, validating and normalizing dataset bundles.
//!
//! A bundle is a small manifest (`bundle.json`) naming the graph file and the
//! optional corpus, bill-location, document-registry and grouping files. The
//! loader never stops at the first problem: every record is decoded on its
//! own and every violation is collected, so a curator fixing a dataset sees
//! the whole list at once. A graph is only returned when the list is empty.

mod corpus;
mod documents;
mod graph_file;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use corpus::{segment_text, CorpusSection, DEFAULT_SECTION_PATTERN};
pub use documents::{BillIndex, BillLocation, DocumentEntry, DocumentRegistry, ResolvedBill};

use crate::model::LogGraph;

/// File name looked up when a bundle path is a directory.
pub const MANIFEST_NAME: &str = "bundle.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub graph_file: PathBuf,
    #[serde(default)]
    pub corpus_file: Option<PathBuf>,
    /// bill_id → document/page mapping.
    #[serde(default)]
    pub documents_file: Option<PathBuf>,
    /// document_id → uri/title registry.
    #[serde(default)]
    pub registry_file: Option<PathBuf>,
    /// Manual cluster grouping file.
    #[serde(default)]
    pub clusters_file: Option<PathBuf>,
    /// Directory holding locally served documents.
    #[serde(default)]
    pub documents_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    graph: PathBuf,
    #[serde(default)]
    corpus: Option<PathBuf>,
    #[serde(default)]
    documents: Option<PathBuf>,
    #[serde(default)]
    registry: Option<PathBuf>,
    #[serde(default)]
    clusters: Option<PathBuf>,
    #[serde(default)]
    documents_dir: Option<PathBuf>,
}

impl DatasetBundle {
    pub fn graph_only(graph_file: impl Into<PathBuf>) -> Self {
        DatasetBundle {
            graph_file: graph_file.into(),
            corpus_file: None,
            documents_file: None,
            registry_file: None,
            clusters_file: None,
            documents_dir: None,
        }
    }

    /// Resolves a bundle from a directory (reads its `bundle.json`), a
    /// manifest file, or a bare graph file.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let manifest_path = if path.is_dir() {
            path.join(MANIFEST_NAME)
        } else {
            path.to_path_buf()
        };
        let text = read_file(&manifest_path)?;
        let value: serde_json::Value = parse_json(&manifest_path, &text)?;
        let is_manifest = value.as_object().is_some_and(|o| o.contains_key("graph"));
        if !is_manifest {
            return Ok(DatasetBundle::graph_only(manifest_path));
        }
        let m: Manifest = serde_json::from_value(value).map_err(|e| IngestError::Bundle {
            path: manifest_path.clone(),
            message: e.to_string(),
        })?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let rel = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        Ok(DatasetBundle {
            graph_file: rel(m.graph),
            corpus_file: m.corpus.map(rel),
            documents_file: m.documents.map(rel),
            registry_file: m.registry.map(rel),
            clusters_file: m.clusters.map(rel),
            documents_dir: m.documents_dir.map(rel),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Drop unknown fields with a warning instead of rejecting them.
    pub lenient: bool,
    /// Heading pattern for single-blob corpora; defaults to `SEC. <n>.`.
    pub section_pattern: Option<String>,
}

/// One invariant violation, located by file and record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub file: String,
    pub location: String,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Malformed,
    UnknownField,
    SchemaVersion,
    InvalidId,
    ReservedId,
    DuplicateId,
    DanglingEndpoint,
    InvalidWeight,
    DuplicateTriple,
    InvalidPage,
    UnresolvedDocument,
    EmptyText,
    UnknownEntity,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.file, self.location, self.message)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid bundle manifest {}: {message}", path.display())]
    Bundle { path: PathBuf, message: String },
    #[error("{} validation error(s):\n{}", .0.len(), join_lines(.0))]
    Validation(Vec<Violation>),
}

fn join_lines(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

impl IngestError {
    /// The collected violations, if this is a validation failure.
    pub fn violations(&self) -> &[Violation] {
        match self {
            IngestError::Validation(v) => v,
            _ => &[],
        }
    }

    /// True for failures of the environment (missing/unreadable files) as
    /// opposed to problems with the data itself.
    pub fn is_io(&self) -> bool {
        matches!(self, IngestError::Io { .. })
    }
}

/// Non-fatal findings from a successful load.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub warnings: Vec<String>,
}

/// A validated bundle.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub graph: LogGraph,
    pub corpus: Vec<CorpusSection>,
    pub bills: BillIndex,
    pub registry: Option<DocumentRegistry>,
    pub bundle: DatasetBundle,
    pub report: ValidationReport,
}

impl LoadedDataset {
    /// Resolves a bill id to its document and page. The bill-location file
    /// wins; entity bill refs are the fallback.
    pub fn resolve_bill(&self, bill_id: &str) -> Option<ResolvedBill> {
        let location = self.bills.get(bill_id).cloned().or_else(|| {
            self.graph
                .entities()
                .flat_map(|e| e.bill_refs.iter())
                .find(|b| b.bill_id == bill_id)
                .map(|b| BillLocation {
                    document_id: b.document_id.clone(),
                    page: Some(b.page),
                })
        })?;
        let doc = self.registry.as_ref()?.get(&location.document_id)?;
        Some(ResolvedBill {
            bill_id: bill_id.to_string(),
            document_id: location.document_id.clone(),
            uri: doc.uri.clone(),
            title: doc.title.clone(),
            page: location.page.unwrap_or(1),
        })
    }

    /// Every bill id referenced by the graph or the bill-location file, sorted.
    pub fn bill_ids(&self) -> Vec<String> {
        let mut ids: std::collections::BTreeSet<String> = self.bills.keys().cloned().collect();
        ids.extend(
            self.graph
                .entities()
                .flat_map(|e| e.bill_refs.iter().map(|b| b.bill_id.clone())),
        );
        ids.into_iter().collect()
    }

    /// Bill ids that do not resolve to a registered document.
    pub fn unresolved_bills(&self) -> Vec<String> {
        self.bill_ids()
            .into_iter()
            .filter(|b| self.resolve_bill(b).is_none())
            .collect()
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(
    path: &Path,
    text: &str,
) -> Result<T, IngestError> {
    serde_json::from_str(text).map_err(|e| IngestError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Collects violations and warnings for one file.
pub(crate) struct Collector<'a> {
    file: String,
    violations: &'a mut Vec<Violation>,
    warnings: &'a mut Vec<String>,
}

impl<'a> Collector<'a> {
    pub(crate) fn new(path: &Path, violations: &'a mut Vec<Violation>, warnings: &'a mut Vec<String>) -> Self {
        let file = path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Collector {
            file,
            violations,
            warnings,
        }
    }

    pub(crate) fn violation(&mut self, location: impl Into<String>, kind: ViolationKind, message: impl Into<String>) {
        self.violations.push(Violation {
            file: self.file.clone(),
            location: location.into(),
            kind,
            message: message.into(),
        });
    }

    pub(crate) fn warn(&mut self, location: &str, message: impl fmt::Display) {
        let w = format!("{}: {}: {}", self.file, location, message);
        log::warn!("{w}");
        self.warnings.push(w);
    }
}

/// Decodes one JSON record, checking unknown fields against `known` first.
/// In lenient mode unknown fields are dropped with a warning.
pub(crate) fn decode_record<T: serde::de::DeserializeOwned>(
    mut value: serde_json::Value,
    known: &[&str],
    location: &str,
    lenient: bool,
    c: &mut Collector<'_>,
) -> Option<T> {
    let Some(obj) = value.as_object_mut() else {
        c.violation(location, ViolationKind::Malformed, "expected a JSON object");
        return None;
    };
    let unknown: Vec<String> = obj.keys().filter(|k| !known.contains(&k.as_str())).cloned().collect();
    if !unknown.is_empty() {
        if lenient {
            for k in &unknown {
                obj.remove(k);
                c.warn(location, format_args!("dropped unknown field `{k}`"));
            }
        } else {
            c.violation(
                location,
                ViolationKind::UnknownField,
                format!("unknown field(s): {}", unknown.join(", ")),
            );
            return None;
        }
    }
    match serde_json::from_value(value) {
        Ok(v) => Some(v),
        Err(e) => {
            c.violation(location, ViolationKind::Malformed, e.to_string());
            None
        }
    }
}

/// Loads and validates a bundle.
///
/// Returns either a fully valid dataset or every violation found across all
/// of the bundle's files.
pub fn load_dataset(bundle: &DatasetBundle, options: &IngestOptions) -> Result<LoadedDataset, IngestError> {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    let registry = match &bundle.registry_file {
        Some(p) => Some(documents::load_registry(p, options, &mut violations, &mut warnings)?),
        None => None,
    };
    let bills = match &bundle.documents_file {
        Some(p) => documents::load_bill_index(p, options, registry.as_ref(), &mut violations, &mut warnings)?,
        None => BillIndex::new(),
    };

    let graph_text = read_file(&bundle.graph_file)?;
    let graph = graph_file::decode_graph(
        &bundle.graph_file,
        &graph_text,
        options,
        registry.as_ref(),
        &mut violations,
        &mut warnings,
    )?;

    let corpus = match &bundle.corpus_file {
        Some(p) => corpus::load_corpus(p, options, graph.as_ref(), &bills, registry.as_ref(), &mut violations, &mut warnings)?,
        None => Vec::new(),
    };

    if !violations.is_empty() {
        return Err(IngestError::Validation(violations));
    }
    let graph = graph.expect("graph is present when no violations were recorded");
    Ok(LoadedDataset {
        graph,
        corpus,
        bills,
        registry,
        bundle: bundle.clone(),
        report: ValidationReport { warnings },
    })
}

/// Validates a graph document held in memory (for example an API response).
pub fn parse_graph_str(text: &str, options: &IngestOptions) -> Result<(LogGraph, ValidationReport), IngestError> {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    let path = Path::new("<memory>");
    let graph = graph_file::decode_graph(path, text, options, None, &mut violations, &mut warnings)?;
    if !violations.is_empty() {
        return Err(IngestError::Validation(violations));
    }
    Ok((graph.expect("no violations"), ValidationReport { warnings }))
}
