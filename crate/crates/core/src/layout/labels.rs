use serde::{Deserialize, Serialize};

/// Extra separation applied when pushing a pair apart, relative to their
/// combined extent, so rounding cannot leave a sliver of overlap.
const MARGIN: f64 = 1e-9;
const MAX_BACKTRACKS: u32 = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelBox {
    pub entity_id: String,
    pub center: [f64; 2],
    pub width: f64,
    pub height: f64,
}

impl LabelBox {
    pub fn new(entity_id: impl Into<String>, center: [f64; 2], width: f64, height: f64) -> Self {
        assert!(width > 0.0 && height > 0.0, "label boxes need positive extent");
        LabelBox {
            entity_id: entity_id.into(),
            center,
            width,
            height,
        }
    }

    /// Penetration depth along each axis; both positive iff the boxes overlap.
    fn penetration(&self, o: &LabelBox) -> [f64; 2] {
        [
            (self.width + o.width) / 2.0 - (self.center[0] - o.center[0]).abs(),
            (self.height + o.height) / 2.0 - (self.center[1] - o.center[1]).abs(),
        ]
    }
}

pub fn overlap_area(a: &LabelBox, b: &LabelBox) -> f64 {
    let [px, py] = a.penetration(b);
    if px > 0.0 && py > 0.0 {
        px.min(a.width).min(b.width) * py.min(a.height).min(b.height)
    } else {
        0.0
    }
}

fn pairs(labels: &[LabelBox]) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..labels.len()).flat_map(move |i| (i + 1..labels.len()).map(move |j| (i, j)))
}

pub fn total_overlap(labels: &[LabelBox]) -> f64 {
    pairs(labels).map(|(i, j)| overlap_area(&labels[i], &labels[j])).sum()
}

pub fn count_overlaps(labels: &[LabelBox]) -> usize {
    pairs(labels)
        .filter(|&(i, j)| overlap_area(&labels[i], &labels[j]) > 0.0)
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelResolution {
    pub labels: Vec<LabelBox>,
    pub passes: u32,
    pub remaining_overlaps: usize,
    /// Total overlap area before the first pass and after each pass.
    pub overlap_history: Vec<f64>,
}

/// One sweep over all pairs, separating each overlapping pair along its
/// axis of least penetration. `scale` shrinks every push.
fn sweep(labels: &mut [LabelBox], scale: f64) {
    for (i, j) in pairs(labels).collect::<Vec<_>>() {
        let [px, py] = labels[i].penetration(&labels[j]);
        if px <= 0.0 || py <= 0.0 {
            continue;
        }
        let axis = if px <= py { 0 } else { 1 };
        let depth = [px, py][axis];
        let extent = [labels[i].width + labels[j].width, labels[i].height + labels[j].height][axis];
        let push = scale * (depth + MARGIN * extent) / 2.0;
        // Coincident centers split by index order.
        let sign = if labels[j].center[axis] >= labels[i].center[axis] { 1.0 } else { -1.0 };
        labels[i].center[axis] -= sign * push;
        labels[j].center[axis] += sign * push;
    }
}

/// Iterative pairwise separation until no box overlaps another or
/// `max_passes` is reached.
///
/// A pass whose sweep would raise the total overlap area is retried with
/// halved pushes; if no retry helps the pass leaves the boxes untouched. The
/// total overlap therefore never increases from one pass to the next.
pub fn resolve_label_overlaps(labels: Vec<LabelBox>, max_passes: u32) -> LabelResolution {
    let mut current = labels;
    let mut total = total_overlap(&current);
    let mut history = vec![total];
    let mut passes = 0;
    while passes < max_passes && count_overlaps(&current) > 0 {
        passes += 1;
        let mut scale = 1.0;
        for _ in 0..=MAX_BACKTRACKS {
            let mut trial = current.clone();
            sweep(&mut trial, scale);
            let t = total_overlap(&trial);
            if t <= total {
                current = trial;
                total = t;
                break;
            }
            scale /= 2.0;
        }
        history.push(total);
    }
    LabelResolution {
        remaining_overlaps: count_overlaps(&current),
        labels: current,
        passes,
        overlap_history: history,
    }
}
