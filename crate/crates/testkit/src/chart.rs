//! Synthetic chart rasters with known boxes and connectors.

use legiscout_core::extract::{DetectedBox, RasterImage};

use crate::rng::Rng;

pub const INK_LEVEL: u8 = 30;
pub const PAPER_LEVEL: u8 = 235;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    fn center(&self) -> [f64; 2] {
        [self.x as f64 + (self.w as f64 - 1.0) / 2.0, self.y as f64 + (self.h as f64 - 1.0) / 2.0]
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x as f64 - 0.5
            && p[0] <= (self.x + self.w) as f64 - 0.5
            && p[1] >= self.y as f64 - 0.5
            && p[1] <= (self.y + self.h) as f64 - 0.5
    }

    fn distance(&self, p: [f64; 2]) -> f64 {
        let b = DetectedBox { x: self.x, y: self.y, w: self.w, h: self.h, confidence: 1.0 };
        b.distance_to(p)
    }

    pub fn iou(&self, b: &DetectedBox) -> f64 {
        DetectedBox { x: self.x, y: self.y, w: self.w, h: self.h, confidence: 1.0 }.iou(b)
    }

    fn gap_ok(&self, o: &Rect, gap: u32) -> bool {
        self.x + self.w + gap <= o.x
            || o.x + o.w + gap <= self.x
            || self.y + self.h + gap <= o.y
            || o.y + o.h + gap <= self.y
    }
}

/// A generated chart and its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticChart {
    pub image: RasterImage,
    pub boxes: Vec<Rect>,
    /// Connected box index pairs, `a < b`.
    pub edges: Vec<(usize, usize)>,
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

/// Portion of the center-to-center segment lying outside both boxes,
/// sampled every half pixel.
fn visible_samples(a: &Rect, b: &Rect) -> Vec<[f64; 2]> {
    let (ca, cb) = (a.center(), b.center());
    let len = (cb[0] - ca[0]).hypot(cb[1] - ca[1]);
    let n = (len * 2.0).ceil() as usize;
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            [ca[0] + t * (cb[0] - ca[0]), ca[1] + t * (cb[1] - ca[1])]
        })
        .filter(|p| !a.contains(*p) && !b.contains(*p))
        .collect()
}

/// Non-overlapping rectangles separated by at least `gap` pixels.
pub fn place_rects(rng: &mut Rng, count: usize, width: u32, height: u32, gap: u32, size: (u32, u32, u32, u32)) -> Vec<Rect> {
    let (wmin, wmax, hmin, hmax) = size;
    let mut rects: Vec<Rect> = Vec::with_capacity(count);
    let mut attempts = 0;
    while rects.len() < count {
        attempts += 1;
        assert!(attempts < 200_000, "canvas too small for {count} rectangles");
        let w = rng.range(wmin as u64, wmax as u64) as u32;
        let h = rng.range(hmin as u64, hmax as u64) as u32;
        let x = rng.range(gap as u64, (width - w - gap) as u64) as u32;
        let y = rng.range(gap as u64, (height - h - gap) as u64) as u32;
        let r = Rect { x, y, w, h };
        if rects.iter().all(|o| r.gap_ok(o, gap)) {
            rects.push(r);
        }
    }
    rects
}

/// Renders filled rectangles only.
pub fn render_rects(rects: &[Rect], width: u32, height: u32) -> RasterImage {
    let mut img = RasterImage::filled(width, height, PAPER_LEVEL);
    for r in rects {
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                img.set(x, y, INK_LEVEL);
            }
        }
    }
    img
}

/// A chart of `2..=max_boxes` boxes joined by straight 2-px connectors that
/// neither cross each other nor pass near a third box.
pub fn synthetic_chart(seed: u64, max_boxes: usize) -> SyntheticChart {
    let (width, height) = (480u32, 360u32);
    let mut rng = Rng::new(seed);
    let n = rng.range(2, max_boxes.max(2) as u64) as usize;
    let boxes = place_rects(&mut rng, n, width, height, 18, (20, 60, 14, 36));

    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    rng.shuffle(&mut pairs);
    let target = rng.range(1, (n + 2) as u64) as usize;
    let mut edges = Vec::new();
    let mut drawn: Vec<Vec<[f64; 2]>> = Vec::new();
    for (a, b) in pairs {
        if edges.len() >= target {
            break;
        }
        let samples = visible_samples(&boxes[a], &boxes[b]);
        if samples.len() < 24 {
            continue;
        }
        let clear_of_boxes = samples.iter().all(|p| {
            boxes
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != a && *i != b)
                .all(|(_, r)| r.distance(*p) > 8.0)
        });
        let clear_of_lines = drawn.iter().all(|other| {
            samples
                .iter()
                .all(|p| other.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) > 8.0))
        });
        if clear_of_boxes && clear_of_lines {
            edges.push((a, b));
            drawn.push(samples);
        }
    }
    edges.sort();

    let mut image = render_rects(&boxes, width, height);
    for &(a, b) in &edges {
        let (ca, cb) = (boxes[a].center(), boxes[b].center());
        let x0 = ca[0].min(cb[0]).floor().max(0.0) as u32;
        let x1 = (ca[0].max(cb[0]).ceil() as u32 + 1).min(width - 1);
        let y0 = ca[1].min(cb[1]).floor().max(0.0) as u32;
        let y1 = (ca[1].max(cb[1]).ceil() as u32 + 1).min(height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if point_segment_distance([x as f64, y as f64], ca, cb) <= 1.0 {
                    image.set(x, y, INK_LEVEL);
                }
            }
        }
    }
    SyntheticChart { image, boxes, edges }
}

/// Precision and recall of a detected set against ground truth.
pub fn precision_recall(true_positive: usize, detected: usize, actual: usize) -> (f64, f64) {
    let p = if detected == 0 { 1.0 } else { true_positive as f64 / detected as f64 };
    let r = if actual == 0 { 1.0 } else { true_positive as f64 / actual as f64 };
    (p, r)
}
