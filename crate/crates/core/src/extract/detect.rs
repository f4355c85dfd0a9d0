//! Box and connector detection on binarized charts.

use serde::{Deserialize, Serialize};

use super::morphology::morphological_open;
use super::raster::RasterImage;
use super::ExtractError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub confidence: f64,
}

impl DetectedBox {
    /// Inclusive pixel containment.
    pub fn contains_pixel(&self, px: u32, py: u32) -> bool {
        px >= self.x && px < self.x + self.w && py >= self.y && py < self.y + self.h
    }

    /// Euclidean distance from a point to the box's rectangle (0 inside).
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        let (x0, y0) = (self.x as f64, self.y as f64);
        let (x1, y1) = (x0 + self.w as f64 - 1.0, y0 + self.h as f64 - 1.0);
        let dx = (x0 - p[0]).max(0.0).max(p[0] - x1);
        let dy = (y0 - p[1]).max(0.0).max(p[1] - y1);
        dx.hypot(dy)
    }

    pub fn iou(&self, other: &DetectedBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w).saturating_sub(self.x.max(other.x)) as f64;
        let iy = (self.y + self.h).min(other.y + other.h).saturating_sub(self.y.max(other.y)) as f64;
        let inter = ix * iy;
        let union = (self.w * self.h + other.w * other.h) as f64 - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedSegment {
    pub endpoints: [[f64; 2]; 2],
    pub confidence: f64,
    pub votes: u32,
}

impl DetectedSegment {
    pub fn length(&self) -> f64 {
        let [a, b] = self.endpoints;
        (a[0] - b[0]).hypot(a[1] - b[1])
    }
}

/// Box detection tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxParams {
    pub min_size: u32,
    /// Minimum fraction of the bounding box a component must fill.
    pub rectangularity: f64,
    /// Opening radius used to strip connector strokes off boxes.
    pub strip_radius: u32,
}

impl Default for BoxParams {
    fn default() -> Self {
        BoxParams {
            min_size: 10,
            rectangularity: 0.85,
            strip_radius: 2,
        }
    }
}

/// Hough transform tuning. Angle bins are 1°, offset bins 1 px.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoughParams {
    /// A peak must collect this fraction of the connector's expected length.
    pub vote_ratio: f64,
    pub min_votes: u32,
    pub min_length: f64,
    /// Gap along a line beyond which supporting pixels form separate runs.
    pub max_gap: f64,
}

impl Default for HoughParams {
    fn default() -> Self {
        HoughParams {
            vote_ratio: 0.6,
            min_votes: 5,
            min_length: 4.0,
            max_gap: 3.0,
        }
    }
}

/// 8-connected components of `mask`, each as a list of pixel coordinates in
/// scan order. Components are ordered by their first pixel in scan order.
pub(crate) fn components(mask: &[bool], w: usize, h: usize) -> Vec<Vec<(u32, u32)>> {
    let mut label = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask[start] || label[start] {
            continue;
        }
        let mut comp = Vec::new();
        label[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            comp.push((x as u32, y as u32));
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && !label[j] {
                        label[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        comp.sort_by_key(|&(x, y)| (y, x));
        out.push(comp);
    }
    out
}

fn bounds(pixels: &[(u32, u32)]) -> (u32, u32, u32, u32) {
    let mut b = (u32::MAX, u32::MAX, 0u32, 0u32);
    for &(x, y) in pixels {
        b.0 = b.0.min(x);
        b.1 = b.1.min(y);
        b.2 = b.2.max(x);
        b.3 = b.3.max(y);
    }
    b
}

/// Bounding box of a component with sparse edge rows and columns peeled
/// off. Closing can leave small wedges where a connector meets a box; they
/// survive the opening but occupy well under half of any edge line.
fn trim_fillets(pixels: &[(u32, u32)]) -> (u32, u32, u32, u32) {
    let (mut x0, mut y0, mut x1, mut y1) = bounds(pixels);
    let (bw, bh) = ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
    let mut grid = vec![false; bw * bh];
    for &(x, y) in pixels {
        grid[(y - y0) as usize * bw + (x - x0) as usize] = true;
    }
    let (ox, oy) = (x0, y0);
    let at = |x: u32, y: u32| grid[(y - oy) as usize * bw + (x - ox) as usize];
    loop {
        let row = |y: u32, x0: u32, x1: u32| (x0..=x1).filter(|&x| at(x, y)).count() as f64 / (x1 - x0 + 1) as f64;
        let col = |x: u32, y0: u32, y1: u32| (y0..=y1).filter(|&y| at(x, y)).count() as f64 / (y1 - y0 + 1) as f64;
        if y1 > y0 && row(y0, x0, x1) < 0.5 {
            y0 += 1;
        } else if y1 > y0 && row(y1, x0, x1) < 0.5 {
            y1 -= 1;
        } else if x1 > x0 && col(x0, y0, y1) < 0.5 {
            x0 += 1;
        } else if x1 > x0 && col(x1, y0, y1) < 0.5 {
            x1 -= 1;
        } else {
            return (x0, y0, x1, y1);
        }
    }
}

/// Filled rectangular components, sorted by (y, x).
pub fn detect_boxes(img: &RasterImage, min_size: u32) -> Result<Vec<DetectedBox>, ExtractError> {
    detect_boxes_with(
        img,
        &BoxParams {
            min_size,
            ..BoxParams::default()
        },
    )
}

pub fn detect_boxes_with(img: &RasterImage, params: &BoxParams) -> Result<Vec<DetectedBox>, ExtractError> {
    img.require_binary()?;
    let solid = morphological_open(img, params.strip_radius)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut boxes: Vec<DetectedBox> = components(&solid.ink_mask(), w, h)
        .into_iter()
        .filter_map(|comp| {
            let (x0, y0, x1, y1) = trim_fillets(&comp);
            let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);
            let inside = comp
                .iter()
                .filter(|&&(x, y)| x >= x0 && x <= x1 && y >= y0 && y <= y1)
                .count();
            let fill = inside as f64 / (bw as f64 * bh as f64);
            (bw >= params.min_size && bh >= params.min_size && fill >= params.rectangularity).then_some(DetectedBox {
                x: x0,
                y: y0,
                w: bw,
                h: bh,
                confidence: fill,
            })
        })
        .collect();
    boxes.sort_by_key(|b| (b.y, b.x));
    Ok(boxes)
}

struct HoughTable {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl HoughTable {
    fn new() -> Self {
        let (cos, sin) = (0..180)
            .map(|deg| {
                let t = (deg as f64).to_radians();
                (t.cos(), t.sin())
            })
            .unzip();
        HoughTable { cos, sin }
    }

    #[inline]
    fn rho(&self, theta: usize, x: f64, y: f64) -> f64 {
        x * self.cos[theta] + y * self.sin[theta]
    }
}

/// Strongest (angle, offset) line through `pixels`: (theta index, rho, votes).
fn hough_peak(table: &HoughTable, pixels: &[(u32, u32)]) -> (usize, f64, u32) {
    let (_, _, x1, y1) = bounds(pixels);
    let diag = ((x1 as f64).hypot(y1 as f64)).ceil() as i64 + 2;
    let offset = diag;
    let bins = (2 * diag + 1) as usize;
    let mut acc = vec![0u32; 180 * bins];
    for &(x, y) in pixels {
        for t in 0..180 {
            let r = table.rho(t, x as f64, y as f64).round() as i64 + offset;
            acc[t * bins + r as usize] += 1;
        }
    }
    let mut best = (0usize, 0usize, 0u32);
    for t in 0..180 {
        for r in 0..bins {
            let v = acc[t * bins + r];
            if v > best.2 {
                best = (t, r, v);
            }
        }
    }
    (best.0, best.1 as f64 - offset as f64, best.2)
}

/// Half-width of the band around a refitted line that belongs to its stroke.
const STROKE_TOLERANCE: f64 = 2.0;

/// Principal-axis line through `pixels` as normal (c, s) and offset rho.
fn fit_line(pixels: &[(u32, u32)]) -> (f64, f64, f64) {
    let n = pixels.len() as f64;
    let (mx, my) = pixels
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x as f64, b + y as f64));
    let (mx, my) = (mx / n, my / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pixels {
        let (dx, dy) = (x as f64 - mx, y as f64 - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // Direction of largest spread; the normal is perpendicular to it.
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (c, s) = (-angle.sin(), angle.cos());
    (c, s, mx * c + my * s)
}

/// Straight connectors between boxes.
///
/// Ink outside every box is split into 8-connected components; each is
/// searched with a Hough accumulator, strongest line first, until no peak
/// reaches `vote_ratio` of the remaining pixels' extent. Each accepted line is
/// clipped to the runs of pixels supporting it.
pub fn detect_segments(img: &RasterImage, boxes: &[DetectedBox]) -> Result<Vec<DetectedSegment>, ExtractError> {
    detect_segments_with(img, boxes, &HoughParams::default())
}

pub fn detect_segments_with(
    img: &RasterImage,
    boxes: &[DetectedBox],
    params: &HoughParams,
) -> Result<Vec<DetectedSegment>, ExtractError> {
    img.require_binary()?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut mask = img.ink_mask();
    for b in boxes {
        for y in b.y..(b.y + b.h).min(h as u32) {
            for x in b.x..(b.x + b.w).min(w as u32) {
                mask[y as usize * w + x as usize] = false;
            }
        }
    }
    let table = HoughTable::new();
    let mut segments = Vec::new();
    for comp in components(&mask, w, h) {
        let mut remaining = comp;
        while remaining.len() as u32 >= params.min_votes {
            let (x0, y0, x1, y1) = bounds(&remaining);
            let extent = ((x1 - x0) as f64).hypot((y1 - y0) as f64) + 1.0;
            let (theta, rho, votes) = hough_peak(&table, &remaining);
            if votes < params.min_votes || (votes as f64) < params.vote_ratio * extent {
                break;
            }
            // Pixels of a finite-width stroke spread over neighbouring offset
            // bins, and the 1° angle quantization tilts the fitted line by up
            // to half a degree over the stroke's length.
            let tolerance = 1.5 + 0.5 * extent * 0.5f64.to_radians().tan();
            let (mut c, mut s, mut rho) = (table.cos[theta], table.sin[theta], rho);
            let near = |c: f64, s: f64, rho: f64, tol: f64, &(x, y): &(u32, u32)| (x as f64 * c + y as f64 * s - rho).abs() <= tol;
            let mut support: Vec<(u32, u32)> = remaining.iter().copied().filter(|p| near(c, s, rho, tolerance, p)).collect();
            if support.is_empty() {
                break;
            }
            // Refit by total least squares so the whole stroke is claimed.
            for _ in 0..2 {
                (c, s, rho) = fit_line(&support);
                support = remaining.iter().copied().filter(|p| near(c, s, rho, STROKE_TOLERANCE, p)).collect();
            }
            let claimed: std::collections::BTreeSet<(u32, u32)> = support.iter().copied().collect();
            let rest: Vec<(u32, u32)> = remaining.iter().copied().filter(|p| !claimed.contains(p)).collect();
            if support.is_empty() {
                break;
            }
            let mut along: Vec<f64> = support.iter().map(|&(x, y)| -s * x as f64 + c * y as f64).collect();
            along.sort_by(|a, b| a.total_cmp(b));
            let mut run_start = along[0];
            let mut prev = along[0];
            let mut emit = |a: f64, b: f64| {
                let seg = DetectedSegment {
                    endpoints: [[rho * c - a * s, rho * s + a * c], [rho * c - b * s, rho * s + b * c]],
                    confidence: (votes as f64 / extent).min(1.0),
                    votes,
                };
                if seg.length() >= params.min_length {
                    segments.push(seg);
                }
            };
            for &t in &along[1..] {
                if t - prev > params.max_gap {
                    emit(run_start, prev);
                    run_start = t;
                }
                prev = t;
            }
            emit(run_start, prev);
            remaining = rest;
        }
    }
    Ok(segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::raster::{INK, PAPER};

    fn fill(img: &mut RasterImage, x: u32, y: u32, w: u32, h: u32) {
        for yy in y..y + h {
            for xx in x..x + w {
                img.set(xx, yy, INK);
            }
        }
    }

    #[test]
    fn two_rectangles() {
        let mut img = RasterImage::filled(120, 60, PAPER);
        fill(&mut img, 5, 10, 40, 20);
        fill(&mut img, 70, 30, 40, 20);
        let boxes = detect_boxes(&img, 10).unwrap();
        assert_eq!(boxes.len(), 2);
        assert_eq!((boxes[0].x, boxes[0].y, boxes[0].w, boxes[0].h), (5, 10, 40, 20));
        assert_eq!((boxes[1].x, boxes[1].y, boxes[1].w, boxes[1].h), (70, 30, 40, 20));
        assert_eq!(boxes[0].confidence, 1.0);
    }

    #[test]
    fn blank_has_nothing() {
        let img = RasterImage::filled(50, 50, PAPER);
        assert!(detect_boxes(&img, 10).unwrap().is_empty());
        assert!(detect_segments(&img, &[]).unwrap().is_empty());
    }

    #[test]
    fn small_and_hollow_shapes_are_not_boxes() {
        let mut img = RasterImage::filled(80, 80, PAPER);
        fill(&mut img, 2, 2, 6, 6);
        // hollow square outline, 2 px stroke
        fill(&mut img, 30, 30, 30, 2);
        fill(&mut img, 30, 58, 30, 2);
        fill(&mut img, 30, 30, 2, 30);
        fill(&mut img, 58, 30, 2, 30);
        assert!(detect_boxes(&img, 10).unwrap().is_empty());
    }

    #[test]
    fn horizontal_connector() {
        let mut img = RasterImage::filled(140, 40, PAPER);
        fill(&mut img, 5, 10, 30, 20);
        fill(&mut img, 100, 10, 30, 20);
        fill(&mut img, 35, 19, 65, 2);
        let boxes = detect_boxes(&img, 10).unwrap();
        assert_eq!(boxes.len(), 2);
        let segs = detect_segments(&img, &boxes).unwrap();
        assert_eq!(segs.len(), 1);
        for p in segs[0].endpoints {
            let d = boxes.iter().map(|b| b.distance_to(p)).fold(f64::INFINITY, f64::min);
            assert!(d <= 3.0, "endpoint {p:?} is {d} px from the nearest box");
        }
    }

    #[test]
    fn iou_and_distance() {
        let a = DetectedBox { x: 0, y: 0, w: 10, h: 10, confidence: 1.0 };
        let b = DetectedBox { x: 5, y: 0, w: 10, h: 10, confidence: 1.0 };
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.distance_to([5.0, 5.0]), 0.0);
        assert_eq!(a.distance_to([12.0, 5.0]), 3.0);
    }
}
