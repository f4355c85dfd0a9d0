use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use legiscout_core::extract::{
    binarize, detect_boxes_with, detect_segments_with, infer_graph, morphological_close, ExtractError,
    ExtractionReport, LabelMap, RasterImage,
};
use legiscout_core::ingest::{load_dataset, DatasetBundle, IngestError, IngestOptions, Violation};
use legiscout_core::layout::{run_to_convergence, LayoutError};
use legiscout_core::search::{build_index, chunk_corpus, semantic_search, ChunkIndex, SearchError};
use legiscout_server::dataset::make_embedder;
use legiscout_server::{AppState, DatasetError, StateError};
use serde::Serialize;
use serde_json::json;

use crate::args::{ExtractArgs, IndexArgs, LayoutArgs, SearchArgs, ServeArgs};
use crate::config::{CliConfig, Format};

/// A failed command, carrying its exit-code class.
#[derive(Debug)]
pub enum Failure {
    /// Bad data or a rejected operation: exit 1.
    Domain(anyhow::Error),
    /// Missing files, unreachable services, busy ports: exit 2.
    Environment(anyhow::Error),
    /// Malformed invocation: exit 64.
    Usage(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Environment(_) => 2,
            Failure::Usage(_) => 64,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (Failure::Domain(e) | Failure::Environment(e) | Failure::Usage(e)) = self;
        write!(f, "{e:#}")
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        if e.is_io() {
            Failure::Environment(e.into())
        } else {
            Failure::Domain(e.into())
        }
    }
}

impl From<SearchError> for Failure {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::EmptyQuery | SearchError::InvalidLimit | SearchError::InvalidChunking { .. } => Failure::Usage(e.into()),
            SearchError::Io(_) | SearchError::RemoteUnavailable(_) => Failure::Environment(e.into()),
            _ => Failure::Domain(e.into()),
        }
    }
}

impl From<ExtractError> for Failure {
    fn from(e: ExtractError) -> Self {
        match e {
            ExtractError::Io(_) | ExtractError::Decode(_) => Failure::Environment(e.into()),
            _ => Failure::Domain(e.into()),
        }
    }
}

impl From<LayoutError> for Failure {
    fn from(e: LayoutError) -> Self {
        Failure::Domain(e.into())
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Ingest(e) => e.into(),
            DatasetError::Search(e) => e.into(),
            e if e.is_environmental() => Failure::Environment(e.into()),
            e => Failure::Domain(e.into()),
        }
    }
}

pub type Outcome = Result<(), Failure>;

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    std::fs::write(path, bytes).map_err(|e| Failure::Environment(anyhow!("cannot write {}: {e}", path.display())))
}

fn print_json(v: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("report serializes"));
}

fn ingest_options(cfg: &CliConfig) -> IngestOptions {
    IngestOptions {
        lenient: cfg.lenient,
        section_pattern: None,
    }
}

#[derive(Serialize)]
struct ValidationOutput {
    valid: bool,
    entities: usize,
    relationships: usize,
    violations: Vec<Violation>,
    unresolved_bills: Vec<String>,
    warnings: Vec<String>,
}

pub fn validate(bundle: &Path, cfg: &CliConfig) -> Outcome {
    let b = DatasetBundle::open(bundle)?;
    let out = match load_dataset(&b, &ingest_options(cfg)) {
        Ok(d) => {
            let unresolved = d.unresolved_bills();
            ValidationOutput {
                valid: unresolved.is_empty(),
                entities: d.graph.entity_count(),
                relationships: d.graph.relationship_count(),
                violations: Vec::new(),
                unresolved_bills: unresolved,
                warnings: d.report.warnings,
            }
        }
        Err(IngestError::Validation(violations)) => ValidationOutput {
            valid: false,
            entities: 0,
            relationships: 0,
            violations,
            unresolved_bills: Vec::new(),
            warnings: Vec::new(),
        },
        Err(e) => return Err(e.into()),
    };
    match cfg.format {
        Format::Json => print_json(&out),
        Format::Text => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for v in &out.violations {
                println!("{v}");
            }
            for b in &out.unresolved_bills {
                println!("unresolved bill: {b}");
            }
            if out.valid {
                println!("valid: {} entities, {} relationships", out.entities, out.relationships);
            } else {
                println!(
                    "invalid: {} violation(s), {} unresolved bill(s)",
                    out.violations.len(),
                    out.unresolved_bills.len()
                );
            }
        }
    }
    if out.valid {
        Ok(())
    } else {
        Err(Failure::Domain(anyhow!("bundle {} is invalid", bundle.display())))
    }
}

pub fn layout(a: &LayoutArgs, cfg: &CliConfig) -> Outcome {
    let mut p = cfg.layout;
    if let Some(s) = a.seed {
        p.seed = s;
    }
    if let Some(k) = a.k {
        p.ideal_edge_length = k;
    }
    if let Some(n) = a.max_iterations {
        p.max_iterations = n;
    }
    if let Some(c) = a.cooling_factor {
        p.cooling_factor = c;
    }
    p.barnes_hut |= a.barnes_hut;
    p.validate().map_err(|e| Failure::Usage(e.into()))?;
    let d = load_dataset(&DatasetBundle::open(&a.bundle)?, &ingest_options(cfg))?;
    let state = run_to_convergence(&d.graph, &p)?;
    write_file(&a.output, state.to_snapshot_json().as_bytes())?;
    let summary = json!({
        "output": a.output,
        "entities": state.positions.len(),
        "iterations": state.iteration,
        "converged": state.converged,
        "seed": p.seed,
    });
    match cfg.format {
        Format::Json => print_json(&summary),
        Format::Text => println!(
            "wrote {} ({} positions, {} iterations, converged: {})",
            a.output.display(),
            state.positions.len(),
            state.iteration,
            state.converged
        ),
    }
    Ok(())
}

pub fn index(a: &IndexArgs, cfg: &CliConfig) -> Outcome {
    let spec = a.embedder.as_deref().unwrap_or(&cfg.embedder);
    let max_tokens = a.max_tokens.unwrap_or(cfg.chunking.max_tokens);
    let overlap = a.overlap_tokens.unwrap_or(cfg.chunking.overlap_tokens);
    let d = load_dataset(&DatasetBundle::open(&a.bundle)?, &ingest_options(cfg))?;
    let chunks = chunk_corpus(&d.corpus, max_tokens, overlap)?;
    let embedder = make_embedder(spec)?;
    let idx = build_index(&chunks, embedder.as_ref())?;
    write_file(&a.output, idx.to_json().as_bytes())?;
    let summary = json!({
        "output": a.output,
        "chunks": idx.len(),
        "embedder_id": idx.embedder_id(),
        "dimension": idx.dimension(),
    });
    match cfg.format {
        Format::Json => print_json(&summary),
        Format::Text => println!(
            "wrote {} ({} chunks, embedder {}, dimension {})",
            a.output.display(),
            idx.len(),
            idx.embedder_id(),
            idx.dimension()
        ),
    }
    Ok(())
}

pub fn search(a: &SearchArgs, cfg: &CliConfig) -> Outcome {
    if a.query.trim().is_empty() {
        return Err(SearchError::EmptyQuery.into());
    }
    let k = a.k.unwrap_or(cfg.search.k);
    let embedder = make_embedder(a.embedder.as_deref().unwrap_or(&cfg.embedder))?;
    let idx = ChunkIndex::load(&a.index, embedder.id())?;
    let hits = semantic_search(&idx, embedder.as_ref(), &a.query, k)?;
    match cfg.format {
        Format::Json => print_json(&hits),
        Format::Text => {
            for (rank, h) in hits.iter().enumerate() {
                let location = h
                    .bill_ref
                    .as_ref()
                    .map(|b| format!("{} p.{}", b.bill_id, b.page))
                    .unwrap_or_default();
                let linked: Vec<&str> = h.linked_entities.iter().map(String::as_str).collect();
                println!("{:>3}  {:.6}  {}  {}  [{}]", rank + 1, h.score, h.target, location, linked.join(", "));
            }
        }
    }
    Ok(())
}

fn default_report_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "graph".into());
    output.with_file_name(format!("{stem}.report.json"))
}

pub fn extract(a: &ExtractArgs, cfg: &CliConfig) -> Outcome {
    let mut p = cfg.extract;
    if let Some(t) = a.threshold {
        p.threshold = t;
    }
    if let Some(m) = a.min_size {
        p.boxes.min_size = m;
    }
    if let Some(r) = a.attach_radius {
        p.attach_radius = r;
    }
    let labels: LabelMap = match &a.labels {
        None => LabelMap::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Environment(anyhow!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| ExtractError::InvalidLabels(format!("{}: {e}", path.display())))?
        }
    };
    let img = RasterImage::load(&a.image)?;
    let closed = morphological_close(&binarize(&img, p.threshold), p.close_radius)?;
    let boxes = detect_boxes_with(&closed, &p.boxes)?;
    let segments = detect_segments_with(&closed, &boxes, &p.hough)?;
    let inferred = infer_graph(&boxes, &segments, &labels, p.attach_radius);
    let mut report = ExtractionReport {
        boxes,
        segments,
        entity_count: 0,
        relationship_count: 0,
        unattached_segments: Vec::new(),
    };
    let result = match inferred {
        Ok(g) => {
            report.entity_count = g.entity_count();
            report.relationship_count = g.relationship_count();
            write_file(&a.output, g.to_json_pretty().as_bytes())?;
            Ok(())
        }
        Err(ExtractError::UnattachedSegment(ids)) => {
            report.unattached_segments = ids.clone();
            Err(ExtractError::UnattachedSegment(ids).into())
        }
        Err(e) => return Err(e.into()),
    };
    let report_path = a.report.clone().unwrap_or_else(|| default_report_path(&a.output));
    write_file(&report_path, serde_json::to_string_pretty(&report).unwrap().as_bytes())?;
    match cfg.format {
        Format::Json => print_json(&report),
        Format::Text => {
            println!(
                "{} boxes, {} segments -> {} entities, {} relationships",
                report.boxes.len(),
                report.segments.len(),
                report.entity_count,
                report.relationship_count
            );
            if !report.unattached_segments.is_empty() {
                println!("unattached segments: {:?}", report.unattached_segments);
            }
        }
    }
    result
}

pub fn serve(a: &ServeArgs, cfg: &CliConfig) -> Outcome {
    let mut sc = cfg.server.clone();
    sc.apply_env(|k| std::env::var(k).ok()).map_err(|e| Failure::Usage(e.into()))?;
    if let Some(b) = &a.bundle {
        sc.bundle = Some(b.clone());
    }
    if let Some(h) = &a.host {
        sc.host = h.clone();
    }
    if let Some(p) = a.port {
        sc.port = p;
    }
    if let Some(e) = &a.embedder {
        sc.embedder = e.clone();
    }
    if let Some(u) = &a.ui_dir {
        sc.ui_dir = Some(u.clone());
    }
    sc.lenient |= cfg.lenient;
    if sc.bundle.is_none() {
        return Err(Failure::Usage(anyhow!("no bundle given (argument, config `server.bundle` or LEGISCOUT_BUNDLE)")));
    }
    let state = AppState::load(sc.clone()).map_err(|e| match e {
        StateError::Dataset(d) => d.into(),
        other => Failure::Domain(other.into()),
    })?;
    let listener = std::net::TcpListener::bind((sc.host.as_str(), sc.port))
        .map_err(|e| Failure::Environment(anyhow!("cannot bind {}:{}: {e}", sc.host, sc.port)))?;
    let addr = listener.local_addr().map_err(|e| Failure::Environment(e.into()))?;
    listener.set_nonblocking(true).map_err(|e| Failure::Environment(e.into()))?;

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("cannot start runtime")
        .map_err(Failure::Environment)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener).map_err(|e| Failure::Environment(e.into()))?;
        match cfg.format {
            Format::Json => println!("{}", json!({"event": "listening", "address": addr.to_string(), "port": addr.port()})),
            Format::Text => println!("listening on http://{addr}"),
        }
        let _ = std::io::stdout().flush();
        legiscout_server::serve(listener, Arc::new(state))
            .await
            .map_err(|e| Failure::Environment(e.into()))
    })
}
