//! Deterministic, seeded world model: harness bodies draped in a bin, an
//! entanglement multigraph over them, depth rendering, and synthesis of the
//! force/torque consequences of every controller primitive.
//!
//! Entanglement is not contact physics. Each pair of bodies that cross
//! geometrically may carry one or more graph edges with integer crossing
//! weights; lifting a body drags its connected component, swings break
//! incident edges stochastically, and a regrasp pull can free the grasped
//! body outright. All randomness flows through one ChaCha stream per world
//! in a documented draw order (placement, edge accepts, then per primitive:
//! spike accept/peak, per-repetition break/slip/eject, hang angle, pull),
//! so replays are bit-identical.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grasp::DepthMap;
use crate::types::{ForceSample, ForceTrace, Phase, SwingParams, ThresholdState};

pub type ObjectId = u32;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("{requested} objects exceed the bin capacity of {capacity}")]
    CapacityExceeded { requested: usize, capacity: usize },
    #[error("invalid world config: {0}")]
    BadConfig(&'static str),
    #[error("no object is grasped")]
    NothingGrasped,
    #[error("unknown object id {0}")]
    UnknownObject(ObjectId),
    #[error("object {0} is not in the bin")]
    NotInBin(ObjectId),
    #[error("body geometry inconsistent: {0}")]
    BadBody(&'static str),
}

/// The two harness products the bin is stocked with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectProfile {
    Medium74cm,
    Long120cm,
}

impl ObjectProfile {
    /// Length in meters.
    pub fn length(self) -> f64 {
        match self {
            ObjectProfile::Medium74cm => 0.74,
            ObjectProfile::Long120cm => 1.20,
        }
    }

    /// Total weight in newtons, connectors included.
    pub fn weight(self) -> f64 {
        match self {
            ObjectProfile::Medium74cm => 0.8,
            ObjectProfile::Long120cm => 1.3,
        }
    }

    /// End-connector weights in newtons.
    pub fn connector_masses(self) -> [f64; 2] {
        match self {
            ObjectProfile::Medium74cm => [0.08, 0.08],
            ObjectProfile::Long120cm => [0.10, 0.10],
        }
    }
}

/// World parameters. The gains are the calibration knobs of the stochastic
/// model; defaults come from the calibration sweep in the repo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub object_profile: ObjectProfile,
    pub n_objects: usize,
    pub rng_seed: u64,
    /// Standard deviation of per-sample force noise, newtons.
    pub noise_sigma: f64,
    /// Scales the per-edge break probability of a swing.
    pub swing_break_gain: f64,
    /// Scales the per-repetition slip probability of a swing.
    pub slip_gain: f64,
    /// Scales the per-neighbor ejection probability of a swing.
    pub eject_gain: f64,
    /// Maximum hang angle (radians from vertical) the support arm can still
    /// catch during a regrasp handoff.
    pub regrasp_vertical_tolerance: f64,
    // Artifact knobs beyond the core calibration gains.
    pub bin_capacity: usize,
    /// Square bin side in meters.
    pub bin_side: f64,
    /// Bin depth in meters; draped heights are clamped below it.
    pub bin_depth: f64,
    /// Lift stroke in meters, the height the grasp point is raised by.
    pub lift_height: f64,
    /// Harness capsule radius in meters (rendering and grasp binding).
    pub capsule_radius: f64,
    /// Render resolution in meters per pixel.
    pub render_resolution: f64,
    /// Base probability that a geometric crossing becomes a graph edge.
    pub entangle_base_p: f64,
    /// Probability that a successful regrasp pull frees the body entirely.
    pub pull_free_p: f64,
    /// Rate of the lift-spike acceptance probability 1 - exp(-gain * W).
    pub lift_spike_gain: f64,
    /// Rate of the transport-spike acceptance probability.
    pub transport_spike_gain: f64,
    /// Fraction of a dangling partner's weight relieved by drape contact.
    pub dangling_relief: f64,
    /// Maximum cluster weight (newtons) the gripper can drag out; weaker
    /// links rip during the lift and the excess stays in the bin.
    pub carry_budget: f64,
    /// Standard deviation of the regrasp hang angle, radians.
    pub hang_sigma: f64,
    /// Horizontal projection factor of the raised side during the spin
    /// check.
    pub drape_factor: f64,
    /// Samples per synthesized trace.
    pub trace_len: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            object_profile: ObjectProfile::Medium74cm,
            n_objects: 8,
            rng_seed: 0,
            noise_sigma: 0.05,
            swing_break_gain: 0.12,
            slip_gain: 0.0015,
            eject_gain: 0.05,
            regrasp_vertical_tolerance: 0.26,
            bin_capacity: 48,
            bin_side: 0.45,
            bin_depth: 0.25,
            lift_height: 0.50,
            capsule_radius: 0.008,
            render_resolution: 0.005,
            entangle_base_p: 0.004,
            pull_free_p: 0.5,
            lift_spike_gain: 1.0,
            transport_spike_gain: 2.0,
            dangling_relief: 0.1,
            carry_budget: 4.0,
            hang_sigma: 0.15,
            drape_factor: 0.5,
            trace_len: 80,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_objects > self.bin_capacity {
            return Err(SimError::CapacityExceeded {
                requested: self.n_objects,
                capacity: self.bin_capacity,
            });
        }
        for (ok, what) in [
            (self.noise_sigma >= 0.0, "noise_sigma must be >= 0"),
            ((0.0..=1.0).contains(&self.swing_break_gain), "swing_break_gain in [0,1]"),
            ((0.0..=1.0).contains(&self.slip_gain), "slip_gain in [0,1]"),
            ((0.0..=1.0).contains(&self.eject_gain), "eject_gain in [0,1]"),
            (self.regrasp_vertical_tolerance >= 0.0, "tolerance must be >= 0"),
            (self.bin_side > 0.0, "bin_side must be positive"),
            (self.bin_depth > 0.0, "bin_depth must be positive"),
            (self.lift_height > 0.0, "lift_height must be positive"),
            (self.capsule_radius > 0.0, "capsule_radius must be positive"),
            (self.render_resolution > 0.0, "render_resolution must be positive"),
            ((0.0..=1.0).contains(&self.entangle_base_p), "entangle_base_p in [0,1]"),
            ((0.0..=1.0).contains(&self.pull_free_p), "pull_free_p in [0,1]"),
            (self.lift_spike_gain >= 0.0, "lift_spike_gain must be >= 0"),
            (self.transport_spike_gain >= 0.0, "transport_spike_gain must be >= 0"),
            ((0.0..1.0).contains(&self.dangling_relief), "dangling_relief in [0,1)"),
            (self.carry_budget > 0.0, "carry_budget must be positive"),
            (self.hang_sigma >= 0.0, "hang_sigma must be >= 0"),
            ((0.0..=1.0).contains(&self.drape_factor), "drape_factor in [0,1]"),
            (self.trace_len >= 8, "trace_len must be >= 8"),
        ] {
            if !ok {
                return Err(SimError::BadConfig(what));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// One wire harness: a draped polyline with end connectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessBody {
    pub id: ObjectId,
    pub polyline: Vec<Point3>,
    /// Declared length in meters; the planar arc length matches within 1%.
    pub length: f64,
    /// Total weight in newtons, connectors included.
    pub weight: f64,
    /// End weights in newtons at arc parameters 0 and 1.
    pub connector_masses: [f64; 2],
    /// Arc-length grasp parameter in [0, 1] while held.
    pub grasp_point: Option<f64>,
}

impl HarnessBody {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.polyline.len() < 2 {
            return Err(SimError::BadBody("polyline needs at least two points"));
        }
        let arc = planar_arc_length(&self.polyline);
        if (arc - self.length).abs() > 0.01 * self.length {
            return Err(SimError::BadBody("polyline length differs from declared length"));
        }
        if !(self.weight > 0.0) {
            return Err(SimError::BadBody("weight must be positive"));
        }
        if self.connector_masses.iter().any(|&m| m < 0.0)
            || self.connector_masses.iter().sum::<f64>() >= self.weight
        {
            return Err(SimError::BadBody("connector masses must be >= 0 and below total weight"));
        }
        if let Some(s) = self.grasp_point {
            if !(0.0..=1.0).contains(&s) {
                return Err(SimError::BadBody("grasp parameter outside [0,1]"));
            }
        }
        Ok(())
    }
}

fn planar_arc_length(poly: &[Point3]) -> f64 {
    poly.windows(2)
        .map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt())
        .sum()
}

/// One entanglement edge; a pair of bodies may carry several.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: ObjectId,
    pub b: ObjectId,
    pub weight: u32,
}

/// Multigraph of crossings between in-bin bodies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntanglementGraph {
    edges: Vec<Edge>,
}

impl EntanglementGraph {
    pub fn add_edge(&mut self, a: ObjectId, b: ObjectId, weight: u32) {
        assert!(a != b, "self-loops are not allowed");
        assert!(weight >= 1, "crossing weight must be >= 1");
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.edges.push(Edge { a, b, weight });
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn incident_indices(&self, id: ObjectId) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&i| self.edges[i].a == id || self.edges[i].b == id)
            .collect()
    }

    pub fn degree(&self, id: ObjectId) -> usize {
        self.incident_indices(id).len()
    }

    pub fn neighbors(&self, id: ObjectId) -> Vec<ObjectId> {
        let mut out: Vec<ObjectId> = self
            .edges
            .iter()
            .filter_map(|e| {
                if e.a == id {
                    Some(e.b)
                } else if e.b == id {
                    Some(e.a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Connected component containing `id`, ascending.
    pub fn component(&self, id: ObjectId) -> Vec<ObjectId> {
        let mut seen = vec![id];
        let mut queue = VecDeque::from([id]);
        while let Some(cur) = queue.pop_front() {
            for n in self.neighbors(cur) {
                if !seen.contains(&n) {
                    seen.push(n);
                    queue.push_back(n);
                }
            }
        }
        seen.sort_unstable();
        seen
    }

    /// Sum of crossing weights over all edges inside the component of `id`.
    pub fn component_crossing_weight(&self, id: ObjectId) -> u32 {
        let comp = self.component(id);
        self.edges
            .iter()
            .filter(|e| comp.binary_search(&e.a).is_ok() && comp.binary_search(&e.b).is_ok())
            .map(|e| e.weight)
            .sum()
    }

    pub fn remove_indices(&mut self, mut indices: Vec<usize>) {
        indices.sort_unstable();
        for i in indices.into_iter().rev() {
            self.edges.remove(i);
        }
    }

    pub fn remove_body(&mut self, id: ObjectId) {
        self.edges.retain(|e| e.a != id && e.b != id);
    }

    pub fn contains(&self, id: ObjectId) -> bool {
        self.edges.iter().any(|e| e.a == id || e.b == id)
    }
}

/// Forced outcomes that override individual stochastic draws; used to build
/// deterministic scenario corpora. Steps are consumed front-to-front when
/// the matching draw site fires; overridden sites consume no RNG.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "site", rename_all = "snake_case")]
pub enum ScriptStep {
    /// Force the lift-spike accept decision.
    LiftSpike { exceed: bool },
    /// Force the transport-spike accept decision.
    TransportSpike { exceed: bool },
    /// Force a whole swing: all incident edges break (or none), and the
    /// slip decision; ejection is suppressed.
    Swing { break_all: bool, slip: bool },
    /// Force the regrasp hang angle and pull outcome.
    Regrasp { hang_angle: f64, pull_free: bool },
}

/// Result of one swing primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwingOutcome {
    pub edges_broken: usize,
    pub slipped: bool,
    pub ejected: Vec<ObjectId>,
}

/// Result of the regrasp physics: the analytic spin-check torques, the
/// handoff verdict, and the new grasp parameter on success.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegraspOutcome {
    /// Wrist torque with end A presented downward, newton-meters.
    pub torque_a: f64,
    /// Wrist torque with end B presented downward, newton-meters.
    pub torque_b: f64,
    pub hang_angle: f64,
    pub handoff_ok: bool,
    /// Whether the pull removed all incident edges (only on success).
    pub pulled_free: bool,
    /// Grasp parameter after a successful handoff.
    pub new_s: Option<f64>,
}

/// The simulated world: bodies in the bin, the entanglement graph, the RNG
/// stream, and the delivered/ejected ledgers.
#[derive(Debug, Clone)]
pub struct BinState {
    config: WorldConfig,
    bodies: BTreeMap<ObjectId, HarnessBody>,
    graph: EntanglementGraph,
    rng: ChaCha8Rng,
    held: Option<ObjectId>,
    delivered: Vec<ObjectId>,
    ejected: Vec<ObjectId>,
    script: VecDeque<ScriptStep>,
}

/// Closed form of the per-edge break probability of one swing repetition.
pub fn break_probability(gain: f64, params: &SwingParams, crossing_weight: u32) -> f64 {
    (gain * params.angle_sum() * params.omega / crossing_weight as f64).clamp(0.0, 1.0)
}

/// Closed form of the per-repetition slip probability.
pub fn slip_probability(gain: f64, params: &SwingParams) -> f64 {
    (gain * params.omega * params.omega * params.angle_sum()).clamp(0.0, 1.0)
}

/// Closed form of the per-neighbor ejection probability given the mean
/// break probability of the connecting edges and the neighbor's degree.
pub fn eject_probability(gain: f64, mean_break_p: f64, neighbor_degree: usize) -> f64 {
    if neighbor_degree == 0 {
        return 0.0;
    }
    (gain * mean_break_p / neighbor_degree as f64).clamp(0.0, 1.0)
}

/// Fraction of an object's weight loaded onto the gripper when its grasp
/// point at arc parameter `s` is raised by `lift_height`.
pub fn lifted_fraction(lift_height: f64, length: f64, s: f64) -> f64 {
    (lift_height / (length * s.max(1.0 - s))).clamp(0.0, 1.0)
}

/// How hard the lift stroke tensions the entanglement: 1 when the object
/// comes fully taut, fading to 0 for end grasps whose slack swallows the
/// whole stroke. A slack grasp cannot snag, which is why end grasps read
/// near zero even in a tangle.
pub fn lift_tension(lifted_fraction: f64) -> f64 {
    ((lifted_fraction - 0.9) / 0.1).clamp(0.0, 1.0)
}

/// Analytic spin-check torques for a body held at `s`: the hanging side is
/// torque-free while the raised side loads the wrist with its moment about
/// the grasp, projected by the drape factor.
pub fn spin_torques(body: &HarnessBody, s: f64, drape_factor: f64) -> (f64, f64) {
    let cable_w = body.weight - body.connector_masses[0] - body.connector_masses[1];
    let l = body.length;
    // Moment of the [0, s] side about the grasp point.
    let moment_a_side = cable_w * s * (l * s / 2.0) + body.connector_masses[0] * l * s;
    // Moment of the [s, 1] side.
    let t = 1.0 - s;
    let moment_b_side = cable_w * t * (l * t / 2.0) + body.connector_masses[1] * l * t;
    // A down: the B side is raised and loads the wrist, and vice versa.
    (drape_factor * moment_b_side, drape_factor * moment_a_side)
}

/// Places `n_objects` draped polylines with a seeded drop heuristic and
/// builds entanglement edges with probability increasing in the local
/// crossing density. Fully deterministic given the seed.
pub fn init_world(config: &WorldConfig) -> Result<BinState, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let n_segments = 12usize;
    let margin = 0.03_f64.min(config.bin_side / 4.0);
    let r = config.capsule_radius;

    let mut bodies: BTreeMap<ObjectId, HarnessBody> = BTreeMap::new();
    for id in 0..config.n_objects as ObjectId {
        let profile = config.object_profile;
        let seg_len = profile.length() / n_segments as f64;
        let mut x = margin + rng.random::<f64>() * (config.bin_side - 2.0 * margin);
        let mut y = margin + rng.random::<f64>() * (config.bin_side - 2.0 * margin);
        let mut heading = rng.random::<f64>() * std::f64::consts::TAU;
        let mut poly = vec![Point3 { x, y, z: r }];
        for _ in 0..n_segments {
            heading += (rng.random::<f64>() - 0.5) * 1.0;
            let (mut nx, mut ny) = (x + seg_len * heading.cos(), y + seg_len * heading.sin());
            // Reflect off the bin walls.
            if nx < margin || nx > config.bin_side - margin {
                heading = std::f64::consts::PI - heading;
                nx = x + seg_len * heading.cos();
            }
            if ny < margin || ny > config.bin_side - margin {
                heading = -heading;
                ny = y + seg_len * heading.sin();
            }
            x = nx.clamp(0.0, config.bin_side);
            y = ny.clamp(0.0, config.bin_side);
            poly.push(Point3 { x, y, z: r });
        }
        bodies.insert(
            id,
            HarnessBody {
                id,
                polyline: poly,
                length: profile.length(),
                weight: profile.weight(),
                connector_masses: profile.connector_masses(),
                grasp_point: None,
            },
        );
    }

    // Geometric crossings between distinct bodies, in placement order.
    let mut crossings: Vec<(ObjectId, ObjectId, f64, f64)> = Vec::new();
    let ids: Vec<ObjectId> = bodies.keys().copied().collect();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            let pa = &bodies[&a].polyline;
            let pb = &bodies[&b].polyline;
            for sa in pa.windows(2) {
                for sb in pb.windows(2) {
                    if let Some((cx, cy)) = segment_intersection_2d(sa, sb) {
                        crossings.push((a, b, cx, cy));
                    }
                }
            }
        }
    }

    // Drape: the later-placed body rides over whatever already lies at each
    // crossing, so bodies crossing a raised section climb higher and the
    // pile builds real heap structure. The raise ramps through neighboring
    // vertices to keep the rendered ridge smooth.
    for &(a, b, cx, cy) in &crossings {
        let (lower, upper) = (a.min(b), a.max(b));
        let under_z = {
            let body = &bodies[&lower];
            let mut z = r;
            let mut best = f64::INFINITY;
            for p in &body.polyline {
                let d = (p.x - cx).powi(2) + (p.y - cy).powi(2);
                if d < best {
                    best = d;
                    z = p.z;
                }
            }
            z
        };
        let body = bodies.get_mut(&upper).expect("crossing body exists");
        let mut nearest = 0usize;
        let mut best = f64::INFINITY;
        for (k, p) in body.polyline.iter().enumerate() {
            let d = (p.x - cx).powi(2) + (p.y - cy).powi(2);
            if d < best {
                best = d;
                nearest = k;
            }
        }
        // Slack pulls riding bodies back down, so the heap saturates well
        // below the bin rim.
        let heap_cap = 0.25 * config.bin_depth;
        let n_points = body.polyline.len();
        for (offset, raise) in [(0isize, 2.0 * r), (-1, r), (1, r)] {
            let k = nearest as isize + offset;
            if k < 0 || k as usize >= n_points {
                continue;
            }
            let p = &mut body.polyline[k as usize];
            p.z = p.z.max(under_z + raise).min(heap_cap);
        }
    }

    // The pile supports spans between crossings: a vertex sags at most one
    // radius per segment away from its supports, so raised bodies stay
    // raised along their length instead of dipping to the floor.
    for body in bodies.values_mut() {
        let n_points = body.polyline.len();
        for k in 1..n_points {
            let floor = body.polyline[k - 1].z - r;
            let p = &mut body.polyline[k];
            p.z = p.z.max(floor);
        }
        for k in (0..n_points - 1).rev() {
            let floor = body.polyline[k + 1].z - r;
            let p = &mut body.polyline[k];
            p.z = p.z.max(floor);
        }
    }

    // Edge accepts, one draw per geometric crossing. Most crossings are
    // loose overlaps; a crossing locks into an edge with a small base
    // probability boosted (up to 3x) by the local crossing density. A pair
    // that crosses many times wraps deeper, so its locks carry more weight.
    let mut pair_counts: BTreeMap<(ObjectId, ObjectId), usize> = BTreeMap::new();
    for &(a, b, _, _) in &crossings {
        *pair_counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
    }
    let mut graph = EntanglementGraph::default();
    let radius2 = 0.06_f64.powi(2);
    for &(a, b, cx, cy) in crossings.iter() {
        let local = crossings
            .iter()
            .filter(|&&(_, _, ox, oy)| (ox - cx).powi(2) + (oy - cy).powi(2) <= radius2)
            .count();
        let boost = (1.0 + 0.1 * (local as f64 - 1.0)).min(3.0);
        let p = (config.entangle_base_p * boost).clamp(0.0, 1.0);
        if rng.random::<f64>() < p {
            let c_pair = pair_counts[&(a.min(b), a.max(b))];
            let weight = 1 + ((c_pair.saturating_sub(1)) / 3).min(2) as u32;
            graph.add_edge(a, b, weight);
        }
    }

    let state = BinState {
        config: config.clone(),
        bodies,
        graph,
        rng,
        held: None,
        delivered: Vec::new(),
        ejected: Vec::new(),
        script: VecDeque::new(),
    };
    debug_assert!(state.conservation_ok());
    Ok(state)
}

/// 2D intersection point of two polyline segments, if any.
fn segment_intersection_2d(sa: &[Point3], sb: &[Point3]) -> Option<(f64, f64)> {
    let (p, q) = (&sa[0], &sa[1]);
    let (r, s) = (&sb[0], &sb[1]);
    let d1 = (q.x - p.x, q.y - p.y);
    let d2 = (s.x - r.x, s.y - r.y);
    let denom = d1.0 * d2.1 - d1.1 * d2.0;
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = ((r.x - p.x) * d2.1 - (r.y - p.y) * d2.0) / denom;
    let u = ((r.x - p.x) * d1.1 - (r.y - p.y) * d1.0) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((p.x + t * d1.0, p.y + t * d1.1))
    } else {
        None
    }
}

impl BinState {
    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn remaining(&self) -> usize {
        self.bodies.len()
    }

    pub fn held(&self) -> Option<ObjectId> {
        self.held
    }

    pub fn body(&self, id: ObjectId) -> Option<&HarnessBody> {
        self.bodies.get(&id)
    }

    pub fn graph(&self) -> &EntanglementGraph {
        &self.graph
    }

    pub fn delivered(&self) -> &[ObjectId] {
        &self.delivered
    }

    pub fn ejected(&self) -> &[ObjectId] {
        &self.ejected
    }

    /// Installs a forced-outcome script (appended after any pending steps).
    pub fn push_script(&mut self, steps: impl IntoIterator<Item = ScriptStep>) {
        self.script.extend(steps);
    }

    /// Adds an entanglement edge between two in-bin bodies; scenario and
    /// test scaffolding for deterministic setups.
    pub fn link(&mut self, a: ObjectId, b: ObjectId, weight: u32) -> Result<(), SimError> {
        for id in [a, b] {
            if !self.bodies.contains_key(&id) {
                return Err(SimError::NotInBin(id));
            }
        }
        if a == b {
            return Err(SimError::BadConfig("self-loops are not allowed"));
        }
        self.graph.add_edge(a, b, weight);
        Ok(())
    }

    /// Objects in bin + delivered + ejected must always equal the initial
    /// count.
    pub fn conservation_ok(&self) -> bool {
        self.bodies.len() + self.delivered.len() + self.ejected.len() == self.config.n_objects
            && !self
                .graph
                .edges()
                .iter()
                .any(|e| !self.bodies.contains_key(&e.a) || !self.bodies.contains_key(&e.b))
    }

    fn held_id(&self) -> Result<ObjectId, SimError> {
        self.held.ok_or(SimError::NothingGrasped)
    }

    fn take_script<T>(&mut self, matcher: impl Fn(&ScriptStep) -> Option<T>) -> Option<T> {
        if let Some(front) = self.script.front() {
            if let Some(v) = matcher(front) {
                self.script.pop_front();
                return Some(v);
            }
        }
        None
    }

    /// Binds the gripper to an explicit body and arc parameter.
    pub fn grasp_object(&mut self, id: ObjectId, s: f64) -> Result<(), SimError> {
        let body = self.bodies.get_mut(&id).ok_or(SimError::NotInBin(id))?;
        body.grasp_point = Some(s.clamp(0.0, 1.0));
        self.held = Some(id);
        Ok(())
    }

    /// Resolves an image-plane grasp point to the topmost body within
    /// gripper reach; returns false when the spot is bare.
    pub fn grasp_at(&mut self, u: usize, v: usize) -> Result<bool, SimError> {
        let res = self.config.render_resolution;
        let px = (u as f64 + 0.5) * res;
        let py = (v as f64 + 0.5) * res;
        let reach = self.config.capsule_radius * 1.5 + res * 0.5;
        let mut best: Option<(ObjectId, f64, f64)> = None; // (id, s, top height)
        for body in self.bodies.values() {
            if let Some((d, s, z)) = nearest_on_polyline(&body.polyline, px, py) {
                if d <= reach {
                    let top = z + self.config.capsule_radius;
                    if best.map_or(true, |(_, _, bz)| top > bz) {
                        best = Some((body.id, s, top));
                    }
                }
            }
        }
        match best {
            Some((id, s, _)) => {
                self.grasp_object(id, s)?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Opens the gripper; the held object stays in the bin.
    pub fn release(&mut self) -> Result<(), SimError> {
        let id = self.held_id()?;
        if let Some(body) = self.bodies.get_mut(&id) {
            body.grasp_point = None;
        }
        self.held = None;
        Ok(())
    }

    /// Rasterizes the bin into a top-down height field: capsules with a
    /// hemispherical cross-section, per-pixel maximum.
    pub fn render_depth(&self, width: usize, height: usize, resolution: f64) -> DepthMap {
        let mut map = DepthMap::zeros(width, height, resolution);
        let r = self.config.capsule_radius;
        for body in self.bodies.values() {
            for seg in body.polyline.windows(2) {
                let (x0, y0) = (seg[0].x.min(seg[1].x) - r, seg[0].y.min(seg[1].y) - r);
                let (x1, y1) = (seg[0].x.max(seg[1].x) + r, seg[0].y.max(seg[1].y) + r);
                let u0 = ((x0 / resolution).floor().max(0.0)) as usize;
                let v0 = ((y0 / resolution).floor().max(0.0)) as usize;
                let u1 = ((x1 / resolution).ceil() as usize).min(width.saturating_sub(1));
                let v1 = ((y1 / resolution).ceil() as usize).min(height.saturating_sub(1));
                for v in v0..=v1.min(height - 1) {
                    for u in u0..=u1 {
                        let px = (u as f64 + 0.5) * resolution;
                        let py = (v as f64 + 0.5) * resolution;
                        let (d, _, z) = point_segment_2d(seg, px, py);
                        if d <= r {
                            let h = z + (r * r - d * d).max(0.0).sqrt();
                            if h > map.get(u, v) {
                                map.set(u, v, h);
                            }
                        }
                    }
                }
            }
        }
        map
    }

    /// Renders at the configured resolution covering the whole bin.
    pub fn observe(&self) -> DepthMap {
        let px = (self.config.bin_side / self.config.render_resolution).ceil() as usize;
        self.render_depth(px, px, self.config.render_resolution)
    }

    /// Synthesizes the force trace of a monitored lift of the held object.
    ///
    /// Isolated bodies ramp to `weight * lifted_fraction(s)`: a full lift
    /// settles only at the end of the stroke while a partial (end) grasp
    /// plateaus early. Entangled bodies superpose a snag spike that crosses
    /// `f_stop` with probability `1 - exp(-lift_spike_gain * W)` where `W`
    /// is the component crossing weight.
    pub fn synth_lift_trace(&mut self, thresholds: &ThresholdState) -> Result<ForceTrace, SimError> {
        let id = self.held_id()?;
        let body = &self.bodies[&id];
        let s = body.grasp_point.ok_or(SimError::NothingGrasped)?;
        let frac = lifted_fraction(self.config.lift_height, body.length, s);
        let w_eff = body.weight * frac;
        let t_len = self.config.trace_len;
        self.shed_load(id);

        let base: Vec<f64> = if frac >= 0.95 {
            // Full lift: the object clears the floor only near the top of
            // the stroke, so the force is still settling at the end.
            (0..t_len)
                .map(|t| w_eff * sigmoid(25.0 * ((t as f64 + 1.0) / t_len as f64 - 0.8)))
                .collect()
        } else {
            // Partial lift: the suspended length stops growing early.
            let t_rise = (frac * t_len as f64).max(5.0);
            (0..t_len)
                .map(|t| w_eff * half_cos(((t as f64 + 1.0) / t_rise).min(1.0)))
                .collect()
        };

        let crossing_weight = self.graph.component_crossing_weight(id);
        let weight_sum: f64 = self
            .graph
            .component(id)
            .iter()
            .filter_map(|cid| self.bodies.get(cid))
            .map(|b| b.weight)
            .sum();
        let spike = self.draw_spike(
            crossing_weight,
            self.config.lift_spike_gain,
            lift_tension(frac),
            weight_sum,
            thresholds.f_stop,
            w_eff,
            |step| match *step {
                ScriptStep::LiftSpike { exceed } => Some(exceed),
                _ => None,
            },
        );
        self.finish_trace(Phase::Lift, base, spike)
    }

    /// Synthesizes the transport trace: flat at the carried weight, with a
    /// snag spike when residual entanglement remains. The terminal value is
    /// the carried weight.
    pub fn synth_transport_trace(
        &mut self,
        thresholds: &ThresholdState,
    ) -> Result<ForceTrace, SimError> {
        let id = self.held_id()?;
        let carried = self.carried_weight(id)?;
        let t_len = self.config.trace_len;
        let base = vec![carried; t_len];
        let residual = self.graph.component_crossing_weight(id);
        let spike = self.draw_spike(
            residual,
            self.config.transport_spike_gain,
            1.0, // the carry is always taut during transport
            carried,
            thresholds.f_stop,
            carried,
            |step| match *step {
                ScriptStep::TransportSpike { exceed } => Some(exceed),
                _ => None,
            },
        );
        self.finish_trace(Phase::Transport, base, spike)
    }

    /// Rips the entanglement boundary when the cluster hanging off the
    /// grasped body outweighs the carry budget: a breadth-first walk from
    /// the grasped body (neighbors ascending) keeps bodies while the
    /// cumulative weight fits, then every edge between the kept set and the
    /// rest is removed. The shed bodies stay in the bin.
    fn shed_load(&mut self, id: ObjectId) {
        let budget = self.config.carry_budget;
        let mut kept = vec![id];
        let mut total = self.bodies[&id].weight;
        let mut queue = VecDeque::from([id]);
        while let Some(cur) = queue.pop_front() {
            for n in self.graph.neighbors(cur) {
                if kept.contains(&n) {
                    continue;
                }
                let w = self.bodies[&n].weight;
                if total + w <= budget {
                    total += w;
                    kept.push(n);
                    queue.push_back(n);
                }
            }
        }
        let rip: Vec<usize> = (0..self.graph.edges().len())
            .filter(|&i| {
                let e = self.graph.edges()[i];
                kept.contains(&e.a) != kept.contains(&e.b)
            })
            .collect();
        self.graph.remove_indices(rip);
        debug_assert!(self.conservation_ok());
    }

    /// Grasped weight plus still-entangled partners, relieved by drape
    /// contact.
    pub fn carried_weight(&self, id: ObjectId) -> Result<f64, SimError> {
        let body = self.bodies.get(&id).ok_or(SimError::NotInBin(id))?;
        let partners: f64 = self
            .graph
            .component(id)
            .iter()
            .filter(|&&cid| cid != id)
            .filter_map(|cid| self.bodies.get(cid))
            .map(|b| b.weight * (1.0 - self.config.dangling_relief))
            .sum();
        Ok(body.weight + partners)
    }

    /// Shared spike draw: returns the spike peak target, if any. The snag
    /// fires with probability `1 - exp(-gain * W * tension)`; a slack grasp
    /// (`tension` 0) cannot snag at all. Scripted overrides consume no RNG
    /// and use the midpoint peak.
    #[allow(clippy::too_many_arguments)]
    fn draw_spike(
        &mut self,
        crossing_weight: u32,
        gain: f64,
        tension: f64,
        weight_sum: f64,
        f_stop: f64,
        base_level: f64,
        matcher: impl Fn(&ScriptStep) -> Option<bool>,
    ) -> Option<f64> {
        if crossing_weight == 0 {
            return None;
        }
        let (exceed, u_peak) = match self.take_script(matcher) {
            Some(forced) => (forced, 0.5),
            None => {
                let p = 1.0 - (-gain * crossing_weight as f64 * tension).exp();
                let accept = self.rng.random::<f64>() < p;
                (accept, self.rng.random::<f64>())
            }
        };
        if exceed {
            Some(f_stop * (1.05 + 0.25 * u_peak) + 0.15 * weight_sum)
        } else {
            // A sub-threshold tug: never reaches f_stop, with headroom for
            // sensor noise, and fading out with the grasp tension.
            let gap = (f_stop - base_level).max(0.0);
            Some(base_level + 0.5 * gap * u_peak * tension)
        }
    }

    fn finish_trace(
        &mut self,
        phase: Phase,
        mut base: Vec<f64>,
        spike_peak: Option<f64>,
    ) -> Result<ForceTrace, SimError> {
        let t_len = base.len();
        if let Some(peak) = spike_peak {
            let t_c = 0.5 * t_len as f64;
            let sigma_t = t_len as f64 / 14.0;
            let base_at_center = base[t_c as usize];
            let amp = (peak - base_at_center).max(0.0);
            for (t, v) in base.iter_mut().enumerate() {
                let d = (t as f64 - t_c) / sigma_t;
                *v += amp * (-0.5 * d * d).exp();
            }
        }
        if self.config.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, self.config.noise_sigma)
                .expect("validated sigma is non-negative");
            for v in base.iter_mut() {
                *v += normal.sample(&mut self.rng);
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        let samples = base
            .into_iter()
            .enumerate()
            .map(|(t, f_z)| ForceSample { t: t as u64, f_z, tau: None })
            .collect();
        Ok(ForceTrace::new(phase, samples).expect("synthesized traces are well-formed"))
    }

    /// Executes a swing of the held object: per repetition, each incident
    /// edge breaks independently, the grip may slip, and neighbors may be
    /// ejected from the bin. Draw order per repetition: edge breaks
    /// (ascending edge index), slip, ejections (ascending neighbor id).
    pub fn apply_swing(&mut self, params: &SwingParams) -> Result<SwingOutcome, SimError> {
        let id = self.held_id()?;
        let mut outcome = SwingOutcome { edges_broken: 0, slipped: false, ejected: Vec::new() };

        if let Some((break_all, slip)) = self.take_script(|step| match *step {
            ScriptStep::Swing { break_all, slip } => Some((break_all, slip)),
            _ => None,
        }) {
            if break_all {
                let incident = self.graph.incident_indices(id);
                outcome.edges_broken = incident.len();
                self.graph.remove_indices(incident);
            }
            if slip {
                outcome.slipped = true;
                self.release()?;
            }
            debug_assert!(self.conservation_ok());
            return Ok(outcome);
        }

        for _rep in 0..params.n {
            // Break phase.
            let incident = self.graph.incident_indices(id);
            let mut broken: Vec<usize> = Vec::new();
            for &edge_idx in &incident {
                let weight = self.graph.edges()[edge_idx].weight;
                let p = break_probability(self.config.swing_break_gain, params, weight);
                if self.rng.random::<f64>() < p {
                    broken.push(edge_idx);
                }
            }
            // Neighbor bookkeeping before mutation.
            let neighbors = self.graph.neighbors(id);
            let neighbor_stats: Vec<(ObjectId, f64, usize)> = neighbors
                .iter()
                .map(|&n| {
                    let connecting: Vec<u32> = self
                        .graph
                        .edges()
                        .iter()
                        .filter(|e| {
                            (e.a == id && e.b == n) || (e.a == n && e.b == id)
                        })
                        .map(|e| e.weight)
                        .collect();
                    let mean_p = connecting
                        .iter()
                        .map(|&w| break_probability(self.config.swing_break_gain, params, w))
                        .sum::<f64>()
                        / connecting.len().max(1) as f64;
                    (n, mean_p, self.graph.degree(n))
                })
                .collect();
            outcome.edges_broken += broken.len();
            self.graph.remove_indices(broken);

            // Slip phase. A slip ends the swing after this repetition, but
            // the repetition's momentum still ejects neighbors below.
            if self.rng.random::<f64>() < slip_probability(self.config.slip_gain, params) {
                outcome.slipped = true;
                self.release()?;
            }

            // Ejection phase.
            for (n, mean_p, degree) in neighbor_stats {
                let p = eject_probability(self.config.eject_gain, mean_p, degree);
                if self.rng.random::<f64>() < p {
                    self.bodies.remove(&n);
                    self.graph.remove_body(n);
                    self.ejected.push(n);
                    outcome.ejected.push(n);
                }
            }
            if outcome.slipped {
                break;
            }
        }
        debug_assert!(self.conservation_ok());
        Ok(outcome)
    }

    /// Executes the regrasp physics: analytic spin-check torques, a seeded
    /// hang angle against the vertical tolerance, and on success the grasp
    /// moves to the midpoint with a chance of pulling the body free of all
    /// entanglement. On failure the object drops back into the bin.
    pub fn apply_regrasp(&mut self) -> Result<RegraspOutcome, SimError> {
        let id = self.held_id()?;
        let body = &self.bodies[&id];
        let s = body.grasp_point.ok_or(SimError::NothingGrasped)?;
        let (torque_a, torque_b) = spin_torques(body, s, self.config.drape_factor);

        let scripted = self.take_script(|step| match *step {
            ScriptStep::Regrasp { hang_angle, pull_free } => Some((hang_angle, pull_free)),
            _ => None,
        });
        let (hang_angle, pull_draw) = match scripted {
            Some((angle, pull)) => (angle, pull),
            None => {
                let angle = if self.config.hang_sigma > 0.0 {
                    Normal::new(0.0, self.config.hang_sigma)
                        .expect("validated sigma")
                        .sample(&mut self.rng)
                } else {
                    0.0
                };
                // The pull draw is consumed on success only.
                (angle, false)
            }
        };
        let handoff_ok = hang_angle.abs() <= self.config.regrasp_vertical_tolerance;

        if handoff_ok {
            let pulled = if scripted.is_some() {
                pull_draw
            } else {
                self.rng.random::<f64>() < self.config.pull_free_p
            };
            if let Some(b) = self.bodies.get_mut(&id) {
                b.grasp_point = Some(0.5);
            }
            if pulled {
                self.graph.remove_body(id);
            }
            debug_assert!(self.conservation_ok());
            Ok(RegraspOutcome {
                torque_a,
                torque_b,
                hang_angle,
                handoff_ok: true,
                pulled_free: pulled,
                new_s: Some(0.5),
            })
        } else {
            self.release()?;
            debug_assert!(self.conservation_ok());
            Ok(RegraspOutcome {
                torque_a,
                torque_b,
                hang_angle,
                handoff_ok: false,
                pulled_free: false,
                new_s: None,
            })
        }
    }

    /// Drops the held object (and any still-attached partners) into the
    /// goal bin. Returns the delivered ids, ascending.
    pub fn deliver(&mut self) -> Result<Vec<ObjectId>, SimError> {
        let id = self.held_id()?;
        let comp = self.graph.component(id);
        for &cid in &comp {
            self.bodies.remove(&cid);
            self.graph.remove_body(cid);
        }
        self.delivered.extend(comp.iter().copied());
        self.held = None;
        debug_assert!(self.conservation_ok());
        Ok(comp)
    }

    /// Versioned snapshot of the full world state, RNG cursor included.
    pub fn snapshot(&self) -> WorldSnapshot {
        let word_pos = self.rng.get_word_pos();
        WorldSnapshot {
            version: 1,
            config: self.config.clone(),
            bodies: self.bodies.values().cloned().collect(),
            edges: self.graph.edges().to_vec(),
            held: self.held,
            delivered: self.delivered.clone(),
            ejected: self.ejected.clone(),
            rng_word_pos_hi: (word_pos >> 64) as u64,
            rng_word_pos_lo: word_pos as u64,
            script: self.script.iter().copied().collect(),
        }
    }

    /// Restores a snapshot; the continuation is bit-identical to the
    /// original world.
    pub fn restore(snapshot: &WorldSnapshot) -> Result<BinState, SimError> {
        snapshot.config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(snapshot.config.rng_seed);
        rng.set_word_pos(((snapshot.rng_word_pos_hi as u128) << 64) | snapshot.rng_word_pos_lo as u128);
        let mut bodies = BTreeMap::new();
        for body in &snapshot.bodies {
            body.validate()?;
            bodies.insert(body.id, body.clone());
        }
        let mut graph = EntanglementGraph::default();
        for e in &snapshot.edges {
            if !bodies.contains_key(&e.a) || !bodies.contains_key(&e.b) {
                return Err(SimError::NotInBin(e.a.max(e.b)));
            }
            graph.add_edge(e.a, e.b, e.weight);
        }
        Ok(BinState {
            config: snapshot.config.clone(),
            bodies,
            graph,
            rng,
            held: snapshot.held,
            delivered: snapshot.delivered.clone(),
            ejected: snapshot.ejected.clone(),
            script: snapshot.script.iter().copied().collect(),
        })
    }
}

/// Serializable world snapshot (versioned).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub version: u32,
    pub config: WorldConfig,
    pub bodies: Vec<HarnessBody>,
    pub edges: Vec<Edge>,
    pub held: Option<ObjectId>,
    pub delivered: Vec<ObjectId>,
    pub ejected: Vec<ObjectId>,
    pub rng_word_pos_hi: u64,
    pub rng_word_pos_lo: u64,
    pub script: Vec<ScriptStep>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Smooth 0 to 1 ramp with zero slope at both ends.
fn half_cos(x: f64) -> f64 {
    (1.0 - (std::f64::consts::PI * x.clamp(0.0, 1.0)).cos()) / 2.0
}

/// Distance from a point to a segment in the plane, with the interpolation
/// parameter and the interpolated z.
fn point_segment_2d(seg: &[Point3], px: f64, py: f64) -> (f64, f64, f64) {
    let (a, b) = (&seg[0], &seg[1]);
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - a.x) * dx + (py - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.x + t * dx, a.y + t * dy);
    let d = ((px - cx).powi(2) + (py - cy).powi(2)).sqrt();
    (d, t, a.z + t * (b.z - a.z))
}

/// Closest point on a polyline: (distance, arc parameter in [0,1], z).
fn nearest_on_polyline(poly: &[Point3], px: f64, py: f64) -> Option<(f64, f64, f64)> {
    let total = planar_arc_length(poly);
    if total <= 0.0 {
        return None;
    }
    let mut best: Option<(f64, f64, f64)> = None;
    let mut arc_before = 0.0;
    for seg in poly.windows(2) {
        let seg_len = ((seg[1].x - seg[0].x).powi(2) + (seg[1].y - seg[0].y).powi(2)).sqrt();
        let (d, t, z) = point_segment_2d(seg, px, py);
        if best.map_or(true, |(bd, _, _)| d < bd) {
            let s = (arc_before + t * seg_len) / total;
            best = Some((d, s, z));
        }
        arc_before += seg_len;
    }
    best
}
