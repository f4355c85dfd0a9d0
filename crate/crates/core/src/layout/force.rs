use std::collections::BTreeMap;

use super::{LayoutError, LayoutParams, LayoutState};
use crate::hash::{fnv1a64, mix64, unit_f64};
use crate::model::LogGraph;

/// Stand-in separation for coincident nodes, as a fraction of `k`.
const COINCIDENT_DISTANCE: f64 = 1e-3;
const THETA: f64 = 0.5;
const MAX_TREE_DEPTH: u32 = 40;

/// Seed-derived unit vector for the coincident pair (a, b), pointing from
/// `b` towards `a`. Drawn by rejection in the unit square to avoid trig.
fn jitter(seed: u64, a: &str, b: &str) -> [f64; 2] {
    let mut state = mix64(seed ^ mix64(fnv1a64(a.as_bytes())) ^ fnv1a64(b.as_bytes()).rotate_left(29));
    loop {
        let x = 2.0 * unit_f64(state) - 1.0;
        state = mix64(state);
        let y = 2.0 * unit_f64(state) - 1.0;
        state = mix64(state);
        let r2 = x * x + y * y;
        if r2 > 1e-12 && r2 <= 1.0 {
            let r = r2.sqrt();
            return [x / r, y / r];
        }
    }
}

/// Repulsive force exerted on `i` by `j`.
#[inline]
fn repulsion(p: &LayoutParams, ids: &[&str], pos: &[[f64; 2]], i: usize, j: usize) -> [f64; 2] {
    let k = p.ideal_edge_length;
    let (dx, dy) = (pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]);
    let d2 = dx * dx + dy * dy;
    if d2 == 0.0 {
        // The jitter direction is defined for the ordered pair, so the two
        // nodes receive exactly opposite forces.
        let (lo, hi, sign) = if ids[i] < ids[j] { (i, j, 1.0) } else { (j, i, -1.0) };
        let u = jitter(p.seed, ids[lo], ids[hi]);
        let f = sign * p.repulsion_constant * k / COINCIDENT_DISTANCE;
        return [f * u[0], f * u[1]];
    }
    // c_rep·k²/d along (dx, dy)/d
    let f = p.repulsion_constant * k * k / d2;
    [f * dx, f * dy]
}

fn exact_repulsion(p: &LayoutParams, ids: &[&str], pos: &[[f64; 2]], out: &mut [[f64; 2]]) {
    let n = pos.len();
    for i in 0..n {
        for j in i + 1..n {
            let f = repulsion(p, ids, pos, i, j);
            out[i][0] += f[0];
            out[i][1] += f[1];
            out[j][0] -= f[0];
            out[j][1] -= f[1];
        }
    }
}

struct Cell {
    center: [f64; 2],
    half: f64,
    mass: f64,
    com: [f64; 2],
    /// Child cell indices, or bodies when this is a leaf.
    children: Option<[usize; 4]>,
    bodies: Vec<usize>,
}

struct QuadTree {
    cells: Vec<Cell>,
}

impl QuadTree {
    fn build(pos: &[[f64; 2]]) -> QuadTree {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for q in pos {
            for a in 0..2 {
                lo[a] = lo[a].min(q[a]);
                hi[a] = hi[a].max(q[a]);
            }
        }
        let half = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / 2.0).max(1e-9) * 1.000_001;
        let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let mut tree = QuadTree {
            cells: vec![Cell { center, half, mass: 0.0, com: [0.0; 2], children: None, bodies: Vec::new() }],
        };
        for i in 0..pos.len() {
            tree.insert(0, i, pos, 0);
        }
        tree.summarize(0, pos);
        tree
    }

    fn quadrant(c: &Cell, q: [f64; 2]) -> usize {
        (q[0] >= c.center[0]) as usize + 2 * (q[1] >= c.center[1]) as usize
    }

    fn insert(&mut self, cell: usize, body: usize, pos: &[[f64; 2]], depth: u32) {
        if let Some(children) = self.cells[cell].children {
            let q = Self::quadrant(&self.cells[cell], pos[body]);
            self.insert(children[q], body, pos, depth + 1);
            return;
        }
        self.cells[cell].bodies.push(body);
        if self.cells[cell].bodies.len() == 1 || depth >= MAX_TREE_DEPTH {
            return;
        }
        let (center, half) = (self.cells[cell].center, self.cells[cell].half / 2.0);
        let mut children = [0; 4];
        for (q, slot) in children.iter_mut().enumerate() {
            let dx = if q & 1 == 1 { half } else { -half };
            let dy = if q & 2 == 2 { half } else { -half };
            *slot = self.cells.len();
            self.cells.push(Cell {
                center: [center[0] + dx, center[1] + dy],
                half,
                mass: 0.0,
                com: [0.0; 2],
                children: None,
                bodies: Vec::new(),
            });
        }
        self.cells[cell].children = Some(children);
        for b in std::mem::take(&mut self.cells[cell].bodies) {
            self.insert(cell, b, pos, depth);
        }
    }

    fn summarize(&mut self, cell: usize, pos: &[[f64; 2]]) {
        let (mut m, mut sx, mut sy) = (0.0, 0.0, 0.0);
        if let Some(children) = self.cells[cell].children {
            for c in children {
                self.summarize(c, pos);
                let child = &self.cells[c];
                m += child.mass;
                sx += child.com[0] * child.mass;
                sy += child.com[1] * child.mass;
            }
        } else {
            for &b in &self.cells[cell].bodies {
                m += 1.0;
                sx += pos[b][0];
                sy += pos[b][1];
            }
        }
        let c = &mut self.cells[cell];
        c.mass = m;
        if m > 0.0 {
            c.com = [sx / m, sy / m];
        }
    }

    fn accumulate(&self, cell: usize, i: usize, p: &LayoutParams, ids: &[&str], pos: &[[f64; 2]], out: &mut [f64; 2]) {
        let c = &self.cells[cell];
        if c.mass == 0.0 {
            return;
        }
        match c.children {
            None => {
                for &j in &c.bodies {
                    if j != i {
                        let f = repulsion(p, ids, pos, i, j);
                        out[0] += f[0];
                        out[1] += f[1];
                    }
                }
            }
            Some(children) => {
                let (dx, dy) = (pos[i][0] - c.com[0], pos[i][1] - c.com[1]);
                let d2 = dx * dx + dy * dy;
                let width = 2.0 * c.half;
                if d2 > 0.0 && width * width < THETA * THETA * d2 {
                    let k = p.ideal_edge_length;
                    let f = p.repulsion_constant * k * k * c.mass / d2;
                    out[0] += f * dx;
                    out[1] += f * dy;
                } else {
                    for ch in children {
                        self.accumulate(ch, i, p, ids, pos, out);
                    }
                }
            }
        }
    }
}

fn barnes_hut_repulsion(p: &LayoutParams, ids: &[&str], pos: &[[f64; 2]], out: &mut [[f64; 2]]) {
    if pos.is_empty() {
        return;
    }
    let tree = QuadTree::build(pos);
    for (i, f) in out.iter_mut().enumerate() {
        tree.accumulate(0, i, p, ids, pos, f);
    }
}

/// Net force on every entity at the state's current positions.
pub fn compute_forces(g: &LogGraph, state: &LayoutState, p: &LayoutParams) -> Result<BTreeMap<String, [f64; 2]>, LayoutError> {
    if !state.covers(g) {
        return Err(LayoutError::StateMismatch);
    }
    let ids: Vec<&str> = state.positions.keys().map(String::as_str).collect();
    let pos: Vec<[f64; 2]> = state.positions.values().copied().collect();
    let mut out = vec![[0.0f64; 2]; pos.len()];
    if p.barnes_hut {
        barnes_hut_repulsion(p, &ids, &pos, &mut out);
    } else {
        exact_repulsion(p, &ids, &pos, &mut out);
    }
    let index = |id: &str| ids.binary_search(&id).expect("state covers graph");
    let k = p.ideal_edge_length;
    for r in g.relationships() {
        let (s, t) = (index(&r.source), index(&r.target));
        if s == t {
            continue;
        }
        let (dx, dy) = (pos[t][0] - pos[s][0], pos[t][1] - pos[s][1]);
        // c_att·d²/k along (dx, dy)/d
        let f = p.attraction_constant * (dx * dx + dy * dy).sqrt() / k;
        out[s][0] += f * dx;
        out[s][1] += f * dy;
        out[t][0] -= f * dx;
        out[t][1] -= f * dy;
    }
    Ok(ids.into_iter().map(str::to_string).zip(out).collect())
}

/// Vector sum of a force field.
pub fn force_sum(forces: &BTreeMap<String, [f64; 2]>) -> [f64; 2] {
    forces
        .values()
        .fold([0.0, 0.0], |acc, f| [acc[0] + f[0], acc[1] + f[1]])
}
