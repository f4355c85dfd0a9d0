//! Force-directed layout with pinning and label collision resolution.
//!
//! Forces follow Fruchterman–Reingold: every node pair repels with
//! `c_rep·k²/d` and every relationship attracts its endpoints with
//! `c_att·d²/k`. Steps are synchronous: all forces are computed from the
//! positions at the start of the step, then each unpinned node moves along
//! its net force by at most the current temperature.
//!
//! Every floating-point operation used here is exactly rounded under IEEE 754
//! (no transcendental functions), so trajectories are reproducible bit for bit
//! on any conforming platform.

mod force;
mod labels;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::{fnv1a64, mix64, unit_f64};
use crate::model::LogGraph;

pub use force::{compute_forces, force_sum};
pub use labels::{count_overlaps, overlap_area, resolve_label_overlaps, total_overlap, LabelBox, LabelResolution};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("invalid layout parameter: {0}")]
    InvalidParams(String),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("layout state does not cover the graph's entities")]
    StateMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutParams {
    /// Ideal edge length `k`.
    pub ideal_edge_length: f64,
    pub repulsion_constant: f64,
    pub attraction_constant: f64,
    pub cooling_factor: f64,
    /// Defaults to `k/2 · √n`.
    pub initial_temperature: Option<f64>,
    pub max_iterations: u32,
    /// Defaults to `1e-3 · k`.
    pub convergence_epsilon: Option<f64>,
    pub seed: u64,
    /// Approximate repulsion with a quadtree (θ = 0.5).
    pub barnes_hut: bool,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            ideal_edge_length: 1.0,
            repulsion_constant: 1.0,
            attraction_constant: 1.0,
            cooling_factor: 0.95,
            initial_temperature: None,
            max_iterations: 500,
            convergence_epsilon: None,
            seed: 0,
            barnes_hut: false,
        }
    }
}

impl LayoutParams {
    pub fn with_k(k: f64) -> Self {
        LayoutParams {
            ideal_edge_length: k,
            ..Self::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        LayoutParams { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(LayoutError::InvalidParams(format!("{name} must be a positive finite number, got {v}")))
            }
        };
        positive("ideal_edge_length", self.ideal_edge_length)?;
        positive("repulsion_constant", self.repulsion_constant)?;
        positive("attraction_constant", self.attraction_constant)?;
        if let Some(t) = self.initial_temperature {
            positive("initial_temperature", t)?;
        }
        if let Some(e) = self.convergence_epsilon {
            positive("convergence_epsilon", e)?;
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return Err(LayoutError::InvalidParams(format!(
                "cooling_factor must lie in (0, 1), got {}",
                self.cooling_factor
            )));
        }
        if self.max_iterations == 0 {
            return Err(LayoutError::InvalidParams("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn initial_temperature_for(&self, n: usize) -> f64 {
        self.initial_temperature
            .unwrap_or(self.ideal_edge_length / 2.0 * (n as f64).sqrt())
    }

    pub fn epsilon(&self) -> f64 {
        self.convergence_epsilon
            .unwrap_or(1e-3 * self.ideal_edge_length)
    }

    /// Radius of the initial placement disc.
    pub fn init_radius(&self, n: usize) -> f64 {
        self.ideal_edge_length * (n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutState {
    pub positions: BTreeMap<String, [f64; 2]>,
    pub pinned: BTreeSet<String>,
    pub temperature: f64,
    pub iteration: u32,
    pub converged: bool,
}

/// Wire form of a layout state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSnapshot {
    pub iteration: u32,
    pub converged: bool,
    pub positions: BTreeMap<String, [f64; 2]>,
    pub pinned: Vec<String>,
}

impl LayoutState {
    pub fn snapshot(&self) -> LayoutSnapshot {
        LayoutSnapshot {
            iteration: self.iteration,
            converged: self.converged,
            positions: self.positions.clone(),
            pinned: self.pinned.iter().cloned().collect(),
        }
    }

    pub fn to_snapshot_json(&self) -> String {
        serde_json::to_string_pretty(&self.snapshot()).expect("snapshot serializes")
    }

    pub fn position(&self, id: &str) -> Option<[f64; 2]> {
        self.positions.get(id).copied()
    }

    pub fn is_pinned(&self, id: &str) -> bool {
        self.pinned.contains(id)
    }

    /// Pins `id`; a no-op if it is already pinned.
    pub fn pin(&mut self, id: &str) -> Result<(), LayoutError> {
        if !self.positions.contains_key(id) {
            return Err(LayoutError::UnknownEntity(id.to_string()));
        }
        self.pinned.insert(id.to_string());
        Ok(())
    }

    pub fn unpin(&mut self, id: &str) -> Result<(), LayoutError> {
        if !self.positions.contains_key(id) {
            return Err(LayoutError::UnknownEntity(id.to_string()));
        }
        self.pinned.remove(id);
        Ok(())
    }

    pub fn freeze_all(&mut self) {
        self.pinned = self.positions.keys().cloned().collect();
    }

    /// Restarts cooling from half the initial temperature.
    pub fn reheat(&mut self, p: &LayoutParams) {
        self.temperature = p.initial_temperature_for(self.positions.len()) * 0.5;
        self.converged = false;
    }

    /// Brings the state in line with a changed graph: positions of removed
    /// entities are dropped and new entities are placed at `place(id)` when it
    /// answers, else at a seed-derived point in the initial disc.
    pub fn reconcile(&mut self, g: &LogGraph, p: &LayoutParams, place: impl Fn(&str) -> Option<[f64; 2]>) {
        self.positions.retain(|id, _| g.contains_entity(id));
        self.pinned.retain(|id| g.contains_entity(id));
        let radius = p.init_radius(g.entity_count().max(1));
        for id in g.entity_ids() {
            if !self.positions.contains_key(id) {
                let xy = place(id).unwrap_or_else(|| {
                    let mut rng = ChaCha8Rng::seed_from_u64(mix64(p.seed ^ fnv1a64(id.as_bytes())));
                    sample_disc(&mut rng, radius)
                });
                self.positions.insert(id.to_string(), xy);
            }
        }
        if g.is_empty() {
            self.converged = true;
        }
    }

    fn covers(&self, g: &LogGraph) -> bool {
        self.positions.len() == g.entity_count() && self.positions.keys().map(String::as_str).eq(g.entity_ids())
    }
}

fn sample_disc(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 2] {
    loop {
        let x = (2.0 * unit_f64(rng.next_u64()) - 1.0) * radius;
        let y = (2.0 * unit_f64(rng.next_u64()) - 1.0) * radius;
        if x * x + y * y <= radius * radius {
            return [x, y];
        }
    }
}

/// Seeded uniform placement in a disc of radius `k·√n` about the origin.
pub fn init_layout(g: &LogGraph, p: &LayoutParams) -> Result<LayoutState, LayoutError> {
    p.validate()?;
    let n = g.entity_count();
    let radius = p.init_radius(n);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut seen: HashSet<[u64; 2]> = HashSet::with_capacity(n);
    let mut positions = BTreeMap::new();
    for id in g.entity_ids() {
        let xy = loop {
            let xy = sample_disc(&mut rng, radius);
            if seen.insert([xy[0].to_bits(), xy[1].to_bits()]) {
                break xy;
            }
        };
        positions.insert(id.to_string(), xy);
    }
    Ok(LayoutState {
        positions,
        pinned: BTreeSet::new(),
        temperature: p.initial_temperature_for(n),
        iteration: 0,
        converged: n == 0,
    })
}

/// Outcome of a single step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub max_displacement: f64,
}

/// One synchronous simulation step.
pub fn step(g: &LogGraph, state: &mut LayoutState, p: &LayoutParams) -> Result<StepReport, LayoutError> {
    if !state.covers(g) {
        return Err(LayoutError::StateMismatch);
    }
    let forces = compute_forces(g, state, p)?;
    let t = state.temperature;
    let mut max_disp = 0.0f64;
    for ((id, pos), f) in state.positions.iter_mut().zip(forces.values()) {
        if state.pinned.contains(id) {
            continue;
        }
        let len = (f[0] * f[0] + f[1] * f[1]).sqrt();
        if len == 0.0 || t == 0.0 {
            continue;
        }
        let disp = len.min(t);
        let scale = disp / len;
        pos[0] += f[0] * scale;
        pos[1] += f[1] * scale;
        max_disp = max_disp.max(disp);
    }
    state.temperature *= p.cooling_factor;
    state.iteration += 1;
    state.converged = max_disp < p.epsilon();
    Ok(StepReport {
        max_displacement: max_disp,
    })
}

/// Steps until converged or `max_steps` more steps were taken.
pub fn advance(g: &LogGraph, state: &mut LayoutState, p: &LayoutParams, max_steps: u32) -> Result<u32, LayoutError> {
    let mut taken = 0;
    while !state.converged && taken < max_steps {
        step(g, state, p)?;
        taken += 1;
    }
    Ok(taken)
}

/// Fresh layout run until convergence or `max_iterations`.
pub fn run_to_convergence(g: &LogGraph, p: &LayoutParams) -> Result<LayoutState, LayoutError> {
    let mut state = init_layout(g, p)?;
    advance(g, &mut state, p, p.max_iterations)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Entity, EntityType, RelType, Relationship};

    fn graph(n: usize, edges: &[(usize, usize)]) -> LogGraph {
        let mut g = LogGraph::new();
        for i in 0..n {
            g.add_entity(Entity::new(format!("n{i}"), format!("N{i}"), EntityType::Other)).unwrap();
        }
        for (k, &(a, b)) in edges.iter().enumerate() {
            g.add_relationship(Relationship::new(format!("r{k}"), format!("n{a}"), format!("n{b}"), RelType::Other))
                .unwrap();
        }
        g
    }

    fn dist(s: &LayoutState, a: &str, b: &str) -> f64 {
        let (p, q) = (s.positions[a], s.positions[b]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    }

    #[test]
    fn init_is_deterministic_and_in_disc() {
        let g = graph(1000, &[]);
        let p = LayoutParams::with_k(2.0).with_seed(7);
        let a = init_layout(&g, &p).unwrap();
        assert_eq!(a, init_layout(&g, &p).unwrap());
        let r = p.init_radius(1000);
        assert!(a.positions.values().all(|q| q[0] * q[0] + q[1] * q[1] <= r * r));
        assert_eq!(a.temperature, 1.0 * (1000f64).sqrt());
    }

    #[test]
    fn empty_graph_is_converged() {
        let s = init_layout(&LogGraph::new(), &LayoutParams::default()).unwrap();
        assert!(s.positions.is_empty() && s.converged);
    }

    #[test]
    fn pair_at_ideal_distance_is_still() {
        let g = graph(2, &[(0, 1)]);
        let p = LayoutParams::default();
        let mut s = init_layout(&g, &p).unwrap();
        s.positions.insert("n0".into(), [0.0, 0.0]);
        s.positions.insert("n1".into(), [1.0, 0.0]);
        let before = s.positions.clone();
        step(&g, &mut s, &p).unwrap();
        assert_eq!(s.positions, before);
        assert!(s.converged);
    }

    #[test]
    fn isolated_node_does_not_move() {
        let g = graph(1, &[]);
        let p = LayoutParams::default();
        let mut s = init_layout(&g, &p).unwrap();
        let before = s.positions.clone();
        step(&g, &mut s, &p).unwrap();
        assert_eq!(s.positions, before);
    }

    #[test]
    fn pair_and_triangle_reach_ideal_lengths() {
        let p = LayoutParams::default();
        let s = run_to_convergence(&graph(2, &[(0, 1)]), &p).unwrap();
        assert!(s.converged && s.iteration <= 500);
        assert!((dist(&s, "n0", "n1") - 1.0).abs() <= 0.02);

        let s = run_to_convergence(&graph(3, &[(0, 1), (1, 2), (0, 2)]), &p).unwrap();
        let d = [dist(&s, "n0", "n1"), dist(&s, "n1", "n2"), dist(&s, "n0", "n2")];
        let mean = d.iter().sum::<f64>() / 3.0;
        assert!(d.iter().all(|x| (x - mean).abs() <= 0.02 * mean), "{d:?}");
    }

    #[test]
    fn pinned_hub_stays_at_origin() {
        let g = graph(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]);
        let p = LayoutParams::default();
        let mut s = init_layout(&g, &p).unwrap();
        s.positions.insert("n0".into(), [0.0, 0.0]);
        s.pin("n0").unwrap();
        advance(&g, &mut s, &p, 500).unwrap();
        assert_eq!(s.positions["n0"], [0.0, 0.0]);
    }

    #[test]
    fn pin_unpin_freeze() {
        let g = graph(4, &[(0, 1), (2, 3)]);
        let p = LayoutParams::default();
        let mut s = init_layout(&g, &p).unwrap();
        assert_eq!(s.pin("ghost"), Err(LayoutError::UnknownEntity("ghost".into())));
        let orig = s.clone();
        s.pin("n1").unwrap();
        s.pin("n1").unwrap();
        s.unpin("n1").unwrap();
        assert_eq!(s, orig);

        s.freeze_all();
        let before = s.positions.clone();
        step(&g, &mut s, &p).unwrap();
        assert_eq!(s.positions, before);
        assert!(s.converged);

        s.unpin("n2").unwrap();
        for _ in 0..20 {
            step(&g, &mut s, &p).unwrap();
        }
        for (id, pos) in &s.positions {
            if id != "n2" {
                assert_eq!(*pos, before[id]);
            }
        }
        assert_ne!(s.positions["n2"], before["n2"]);
    }

    #[test]
    fn reheat_is_idempotent() {
        let g = graph(3, &[(0, 1)]);
        let p = LayoutParams::default();
        let mut s = run_to_convergence(&g, &p).unwrap();
        s.reheat(&p);
        let once = s.clone();
        s.reheat(&p);
        assert_eq!(s, once);
        assert!(!s.converged);
        assert_eq!(s.temperature, p.initial_temperature_for(3) * 0.5);
    }

    #[test]
    fn temperature_strictly_decreases() {
        let g = graph(5, &[(0, 1), (1, 2), (3, 4)]);
        let p = LayoutParams::default();
        let mut s = init_layout(&g, &p).unwrap();
        let mut last = s.temperature;
        while !s.converged {
            step(&g, &mut s, &p).unwrap();
            assert!(s.temperature < last);
            last = s.temperature;
        }
    }

    #[test]
    fn reconcile_adds_and_drops() {
        let mut g = graph(3, &[(0, 1)]);
        let p = LayoutParams::default();
        let mut s = init_layout(&g, &p).unwrap();
        s.pin("n2").unwrap();
        g.remove_entity("n2").unwrap();
        g.add_entity(Entity::new("m", "M", EntityType::Other)).unwrap();
        s.reconcile(&g, &p, |id| (id == "m").then_some([5.0, 5.0]));
        assert_eq!(s.positions.keys().collect::<Vec<_>>(), ["m", "n0", "n1"]);
        assert_eq!(s.positions["m"], [5.0, 5.0]);
        assert!(s.pinned.is_empty());
        assert!(step(&g, &mut s, &p).is_ok());
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let g = graph(2, &[]);
        let p = LayoutParams::default();
        let mut s = init_layout(&graph(3, &[]), &p).unwrap();
        assert_eq!(step(&g, &mut s, &p), Err(LayoutError::StateMismatch));
    }

    #[test]
    fn params_are_checked() {
        let bad = [
            LayoutParams { ideal_edge_length: 0.0, ..Default::default() },
            LayoutParams { cooling_factor: 1.0, ..Default::default() },
            LayoutParams { max_iterations: 0, ..Default::default() },
            LayoutParams { convergence_epsilon: Some(-1.0), ..Default::default() },
            LayoutParams { repulsion_constant: f64::NAN, ..Default::default() },
        ];
        for p in bad {
            assert!(matches!(p.validate(), Err(LayoutError::InvalidParams(_))), "{p:?}");
        }
    }

    #[test]
    fn snapshot_shape() {
        let g = graph(2, &[(0, 1)]);
        let mut s = init_layout(&g, &LayoutParams::default()).unwrap();
        s.pin("n0").unwrap();
        let v: serde_json::Value = serde_json::from_str(&s.to_snapshot_json()).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["converged", "iteration", "pinned", "positions"]);
        assert_eq!(v["pinned"], serde_json::json!(["n0"]));
        assert_eq!(v["positions"]["n1"].as_array().unwrap().len(), 2);
    }
}
