use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{DurpError, EnergyModel, RoutingGraph};

/// Weights of the routing heuristic
/// `h(n) = w_dist * d(n, goal) + w_energy * E(n) + w_load * L(n)`.
///
/// By default `E(n)` is the expected energy to fly from `n` to the goal and a
/// negative `w_load` makes loaded RSUs attractive. With `strict_paper` set,
/// `E(n)` is the charge left on arrival at `n` and every weight is used as a
/// nonnegative magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeuristicWeights {
    pub w_dist: f64,
    pub w_energy: f64,
    pub w_load: f64,
    pub strict_paper: bool,
}

impl Default for HeuristicWeights {
    fn default() -> Self {
        Self { w_dist: 2.0, w_energy: 0.05, w_load: -100.0, strict_paper: false }
    }
}

impl HeuristicWeights {
    /// Pure distance heuristic; admissible whenever `w_dist` does not exceed
    /// the per-meter edge cost.
    pub fn distance_only(w_dist: f64) -> Self {
        Self { w_dist, w_energy: 0.0, w_load: 0.0, strict_paper: false }
    }

    pub fn is_finite(&self) -> bool {
        self.w_dist.is_finite() && self.w_energy.is_finite() && self.w_load.is_finite()
    }

    pub fn value(&self, distance: f64, energy: f64, load: f64) -> f64 {
        if self.strict_paper {
            self.w_dist.abs() * distance + self.w_energy.abs() * energy + self.w_load.abs() * load
        } else {
            self.w_dist * distance + self.w_energy * energy + self.w_load * load
        }
    }
}

/// Everything the heuristic reads during one search.
#[derive(Debug, Clone, Copy)]
pub struct HeuristicContext<'a> {
    pub graph: &'a RoutingGraph,
    pub start: usize,
    pub goal: usize,
    pub energy: &'a EnergyModel,
    /// Per-vertex load in normalized units (workload / workload_max).
    pub loads: &'a [f64],
    pub weights: &'a HeuristicWeights,
}

impl HeuristicContext<'_> {
    pub fn heuristic(&self, n: usize) -> f64 {
        let d = self.graph.distance(n, self.goal);
        let energy = if self.weights.strict_paper {
            self.energy.battery_remaining() - self.energy.move_energy_per_meter * self.graph.distance(self.start, n)
        } else {
            self.energy.move_energy_per_meter * d
        };
        let load = self.loads.get(n).copied().unwrap_or(0.0);
        self.weights.value(d, energy, load)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub path: Vec<usize>,
    pub cost: f64,
    pub expansions: usize,
}

impl RoutePlan {
    /// Number of edges on the path.
    pub fn hops(&self) -> usize {
        self.path.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    g: f64,
    vertex: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap: reverse so the smallest (f, h, vertex) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.h.total_cmp(&self.h)).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

pub fn astar_search(graph: &RoutingGraph, ctx: &HeuristicContext<'_>) -> Result<RoutePlan, DurpError> {
    astar_with(graph, ctx.start, ctx.goal, |n| ctx.heuristic(n))
}

/// A* with an arbitrary heuristic. Closed vertices are never reopened; open
/// ties on `f` go to the smaller `h`, then the smaller vertex index.
pub fn astar_with(
    graph: &RoutingGraph,
    start: usize,
    goal: usize,
    heuristic: impl Fn(usize) -> f64,
) -> Result<RoutePlan, DurpError> {
    for v in [start, goal] {
        if v >= graph.len() {
            return Err(DurpError::UnknownVertex(v));
        }
    }
    let n = graph.len();
    let mut best_g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut expansions = 0;

    best_g[start] = 0.0;
    let h0 = heuristic(start);
    open.push(OpenEntry { f: h0, h: h0, g: 0.0, vertex: start });

    while let Some(OpenEntry { vertex, g, .. }) = open.pop() {
        if closed[vertex] || g > best_g[vertex] {
            continue;
        }
        if vertex == goal {
            let mut path = vec![goal];
            let mut v = goal;
            while v != start {
                v = parent[v];
                path.push(v);
            }
            path.reverse();
            return Ok(RoutePlan { path, cost: g, expansions });
        }
        closed[vertex] = true;
        expansions += 1;
        for &(m, w) in graph.neighbors(vertex) {
            if closed[m] {
                continue;
            }
            let tentative = g + w;
            if tentative < best_g[m] {
                best_g[m] = tentative;
                parent[m] = vertex;
                let h = heuristic(m);
                open.push(OpenEntry { f: tentative + h, h, g: tentative, vertex: m });
            }
        }
    }
    Err(DurpError::NoPath { start, goal })
}
