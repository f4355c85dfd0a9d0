//! Shape-and-connector extraction from chart rasters.
//!
//! The pipeline is binarize → close → detect boxes → detect connector
//! segments → infer a graph. It targets clean charts: axis-aligned filled
//! boxes on a light background, joined by straight single-stroke connectors.
//! Text is not recognized; labels come from a sidecar map of name → box index.

mod detect;
mod morphology;
mod raster;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detect::{
    detect_boxes, detect_boxes_with, detect_segments, detect_segments_with, BoxParams, DetectedBox, DetectedSegment,
    HoughParams,
};
pub use morphology::{binarize, morphological_close, morphological_open};
pub use raster::{RasterImage, INK, PAPER};

use crate::model::{is_token, Entity, EntityType, LogGraph, RelType, Relationship};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error("raster {width}x{height} does not match {len} pixels")]
    Dimensions { width: u32, height: u32, len: usize },
    #[error("input must be binarized (pixels 0 or 255)")]
    NonBinaryInput,
    #[error("segment(s) {0:?} are not attached to two distinct boxes")]
    UnattachedSegment(Vec<usize>),
    #[error("invalid label sidecar: {0}")]
    InvalidLabels(String),
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Sidecar labels: display name → detected box index (in (y, x) order).
pub type LabelMap = BTreeMap<String, usize>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractParams {
    pub threshold: u8,
    pub close_radius: u32,
    pub boxes: BoxParams,
    pub hough: HoughParams,
    /// Maximum distance from a segment endpoint to the box it attaches to.
    pub attach_radius: f64,
}

impl Default for ExtractParams {
    fn default() -> Self {
        ExtractParams {
            threshold: 128,
            close_radius: 1,
            boxes: BoxParams::default(),
            hough: HoughParams::default(),
            attach_radius: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult {
    pub boxes: Vec<DetectedBox>,
    pub segments: Vec<DetectedSegment>,
    pub inferred: LogGraph,
}

/// Machine-readable summary written next to the extracted graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub boxes: Vec<DetectedBox>,
    pub segments: Vec<DetectedSegment>,
    pub entity_count: usize,
    pub relationship_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unattached_segments: Vec<usize>,
}

impl ExtractionReport {
    pub fn from_result(r: &ExtractionResult) -> Self {
        ExtractionReport {
            boxes: r.boxes.clone(),
            segments: r.segments.clone(),
            entity_count: r.inferred.entity_count(),
            relationship_count: r.inferred.relationship_count(),
            unattached_segments: Vec::new(),
        }
    }
}

fn sanitize_id(label: &str) -> String {
    let id: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect();
    if id.is_empty() {
        "_".to_string()
    } else {
        id
    }
}

/// Index of the nearest box to `p` within `radius`, skipping `exclude`.
fn nearest_box(boxes: &[DetectedBox], p: [f64; 2], radius: f64, exclude: Option<usize>) -> Option<usize> {
    boxes
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, b)| (i, b.distance_to(p)))
        .filter(|&(_, d)| d <= radius)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}

/// One entity per box and one undirected `other` relationship per segment.
///
/// Entities are named from `labels` when a label targets their box, else
/// `node_<k>`. Repeated connectors between the same pair fold into one
/// relationship whose weight counts them.
pub fn infer_graph(
    boxes: &[DetectedBox],
    segments: &[DetectedSegment],
    labels: &LabelMap,
    attach_radius: f64,
) -> Result<LogGraph, ExtractError> {
    let mut names: Vec<Option<&str>> = vec![None; boxes.len()];
    for (label, &idx) in labels {
        let slot = names
            .get_mut(idx)
            .ok_or_else(|| ExtractError::InvalidLabels(format!("label `{label}` targets box {idx}, but only {} boxes were detected", boxes.len())))?;
        if let Some(prev) = slot {
            return Err(ExtractError::InvalidLabels(format!("labels `{prev}` and `{label}` both target box {idx}")));
        }
        *slot = Some(label);
    }

    let mut g = LogGraph::new();
    let mut ids = Vec::with_capacity(boxes.len());
    for (k, name) in names.iter().enumerate() {
        let (id, display) = match name {
            Some(n) if is_token(n) => (n.to_string(), n.to_string()),
            Some(n) => (sanitize_id(n), n.to_string()),
            None => (format!("node_{k}"), format!("node_{k}")),
        };
        let e = Entity::new(id.clone(), display, EntityType::Other).with_role(format!("box {k}"));
        g.add_entity(e)
            .map_err(|e| ExtractError::InvalidLabels(e.to_string()))?;
        ids.push(id);
    }

    let mut orphans = Vec::new();
    let mut pairs: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for (i, s) in segments.iter().enumerate() {
        let a = nearest_box(boxes, s.endpoints[0], attach_radius, None);
        let b = a.and_then(|a| nearest_box(boxes, s.endpoints[1], attach_radius, Some(a)));
        match (a, b) {
            (Some(a), Some(b)) => *pairs.entry((a.min(b), a.max(b))).or_default() += 1,
            _ => orphans.push(i),
        }
    }
    if !orphans.is_empty() {
        return Err(ExtractError::UnattachedSegment(orphans));
    }
    for (n, ((a, b), count)) in pairs.into_iter().enumerate() {
        let r = Relationship::new(format!("edge_{n}"), ids[a].clone(), ids[b].clone(), RelType::Other)
            .undirected()
            .with_weight(count as f64);
        g.add_relationship(r).expect("pairs are unique and endpoints exist");
    }
    g.set_meta("source", "chart-extract");
    g.record_entity_types();
    Ok(g)
}

/// Runs the full pipeline on a grayscale raster.
pub fn extract_chart(
    img: &RasterImage,
    params: &ExtractParams,
    labels: &LabelMap,
) -> Result<ExtractionResult, ExtractError> {
    let bin = binarize(img, params.threshold);
    let closed = morphological_close(&bin, params.close_radius)?;
    let boxes = detect_boxes_with(&closed, &params.boxes)?;
    let segments = detect_segments_with(&closed, &boxes, &params.hough)?;
    let inferred = infer_graph(&boxes, &segments, labels, params.attach_radius)?;
    Ok(ExtractionResult {
        boxes,
        segments,
        inferred,
    })
}
