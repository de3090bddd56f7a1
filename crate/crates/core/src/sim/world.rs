//! Slot-by-slot evolution of node workloads and vehicle mobility.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EdgeNode, NodeId, NodeKind, Position, SimError, VehicleState};

/// Closed polyline the vehicle drives around at constant speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub waypoints: Vec<[f64; 2]>,
    /// m/s
    pub speed: f64,
}

impl Route {
    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| seg_len(a, b)).sum()
    }

    fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.waypoints.len();
        (0..if n > 1 { n } else { 0 }).map(move |i| (self.waypoints[i], self.waypoints[(i + 1) % n]))
    }

    /// Position and unit heading after travelling `progress` meters from the first waypoint.
    pub fn point_at(&self, progress: f64) -> ([f64; 2], [f64; 2]) {
        let total = self.length();
        let Some(first) = self.waypoints.first().copied() else {
            return ([0.0, 0.0], [0.0, 0.0]);
        };
        if total <= 0.0 {
            return (first, [0.0, 0.0]);
        }
        let mut s = progress.rem_euclid(total);
        for (a, b) in self.segments() {
            let len = seg_len(a, b);
            if len == 0.0 {
                continue;
            }
            if s <= len {
                let dir = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
                return ([a[0] + dir[0] * s, a[1] + dir[1] * s], dir);
            }
            s -= len;
        }
        (first, [0.0, 0.0])
    }
}

fn seg_len(a: [f64; 2], b: [f64; 2]) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

/// Seeded background demand on RSUs, expressed as a utilization of each
/// node's per-slot compute: `base + hotspot[e] + walk[e](t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundParams {
    pub base: f64,
    /// Static per-node offset, indexed by node position in `WorldState::nodes`.
    pub hotspot: Vec<f64>,
    /// Maximum random-walk increment per slot.
    pub walk_step: f64,
    /// The walk is confined to `[0, walk_max]`.
    pub walk_max: f64,
    /// Cycles/s that one unit of utilization stands for. When unset each
    /// node's own compute is used, so demand scales with capacity.
    #[serde(default)]
    pub reference_compute: Option<f64>,
}

impl BackgroundParams {
    pub fn none(nodes: usize) -> Self {
        Self { base: 0.0, hotspot: vec![0.0; nodes], walk_step: 0.0, walk_max: 0.0, reference_compute: None }
    }

    pub fn utilization(&self, index: usize, walk: f64) -> f64 {
        self.base + self.hotspot.get(index).copied().unwrap_or(0.0) + walk
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Slot duration in seconds.
    pub slot_seconds: f64,
    pub coverage_radius: f64,
    pub route: Route,
    pub background: BackgroundParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Current slot, starting at 1.
    pub time_slot: usize,
    pub t_max: usize,
    pub nodes: Vec<EdgeNode>,
    pub vehicle: VehicleState,
    pub serving: NodeId,
    pub rng_seed: u64,
    /// Meters travelled along the route.
    pub route_progress: f64,
    /// Per-node random-walk component of background demand.
    pub walk: Vec<f64>,
}

impl WorldState {
    pub fn node(&self, id: NodeId) -> Option<&EdgeNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn serving_node(&self) -> &EdgeNode {
        self.node(self.serving).expect("serving node present")
    }

    pub fn rsus(&self) -> impl Iterator<Item = &EdgeNode> {
        self.nodes.iter().filter(|n| n.is_rsu())
    }

    pub fn is_final_slot(&self) -> bool {
        self.time_slot >= self.t_max
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.time_slot == 0 || self.time_slot > self.t_max {
            return Err(SimError::InvalidParameter(format!(
                "time slot {} outside [1, {}]",
                self.time_slot, self.t_max
            )));
        }
        for n in &self.nodes {
            n.validate()?;
        }
        self.vehicle.validate()?;
        match self.node(self.serving) {
            Some(n) if n.is_rsu() => Ok(()),
            _ => Err(SimError::UnknownNode(self.serving)),
        }
    }
}

/// Handover rule: nearest RSU covering `pos`, ties to the lowest id. Falls back
/// to the nearest RSU overall when the vehicle is outside every coverage disc.
pub fn select_serving(nodes: &[EdgeNode], pos: &Position, coverage_radius: f64) -> Option<NodeId> {
    let nearest = |in_range_only: bool| {
        nodes
            .iter()
            .filter(|n| n.is_rsu())
            .map(|n| (n.pos.distance_to(pos), n.id))
            .filter(|(d, _)| !in_range_only || *d <= coverage_radius)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id)
    };
    nearest(true).or_else(|| nearest(false))
}

/// Background demand for every node in slot `t`, in whole cycles, plus the
/// walk state for the next slot. Depends only on `(seed, t, walk)`.
pub fn background_arrivals(
    cfg: &WorldConfig,
    nodes: &[EdgeNode],
    walk: &[f64],
    seed: u64,
    t: usize,
) -> (Vec<f64>, Vec<f64>) {
    let bg = &cfg.background;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    let mut next_walk = Vec::with_capacity(nodes.len());
    let mut arrivals = Vec::with_capacity(nodes.len());
    for (i, node) in nodes.iter().enumerate() {
        let w = walk.get(i).copied().unwrap_or(0.0);
        let step: f64 = if bg.walk_step > 0.0 { rng.random_range(-bg.walk_step..=bg.walk_step) } else { 0.0 };
        let w_next = (w + step).clamp(0.0, bg.walk_max.max(0.0));
        next_walk.push(w_next);
        let a = if node.kind == NodeKind::Rsu {
            (bg.utilization(i, w_next).max(0.0) * bg.reference_compute.unwrap_or(node.compute) * cfg.slot_seconds)
                .round()
        } else {
            0.0
        };
        arrivals.push(a);
    }
    (arrivals, next_walk)
}

/// Advances one slot: moves the vehicle, drains each node by its compute,
/// then adds the assigned task cycles and background demand.
pub fn step_world(
    cfg: &WorldConfig,
    state: &WorldState,
    assignments: &[(NodeId, f64)],
) -> Result<WorldState, SimError> {
    if state.time_slot >= state.t_max {
        return Err(SimError::HorizonExceeded(state.t_max));
    }
    let mut next = state.clone();
    next.time_slot += 1;

    next.route_progress = state.route_progress + cfg.route.speed * cfg.slot_seconds;
    let (xy, dir) = cfg.route.point_at(next.route_progress);
    next.vehicle.pos = Position::new(xy[0], xy[1], state.vehicle.pos.z);
    next.vehicle.velocity = [dir[0] * cfg.route.speed, dir[1] * cfg.route.speed];

    let (arrivals, walk) = background_arrivals(cfg, &state.nodes, &state.walk, state.rng_seed, next.time_slot);
    for (node, arrival) in next.nodes.iter_mut().zip(&arrivals) {
        let drain = (node.compute * cfg.slot_seconds).floor();
        node.workload = (node.workload - drain).max(0.0) + arrival;
    }
    for &(id, cycles) in assignments {
        if !(cycles >= 0.0 && cycles.is_finite()) {
            return Err(SimError::InvalidParameter(format!("assignment of {cycles} cycles to node {id}")));
        }
        let idx = next.node_index(id).ok_or(SimError::UnknownNode(id))?;
        next.nodes[idx].workload += cycles.round();
    }
    next.walk = walk;

    next.serving = select_serving(&next.nodes, &next.vehicle.pos, cfg.coverage_radius)
        .ok_or_else(|| SimError::InvalidParameter("world has no RSU".into()))?;
    Ok(next)
}
