use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    astar_search, astar_with, DurpError, EnergyModel, HeuristicContext, HeuristicWeights, RoutingGraph, TraceEntry,
};
use crate::sim::{EdgeNode, NodeId, Position};

/// How a hovering UAV relieves the RSUs below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssistParams {
    /// Horizontal radius in meters.
    pub assist_radius: f64,
    /// Fraction of the transferable excess moved per slot, in `[0, 1]`.
    pub absorb_rate: f64,
    /// Soft overload threshold as a fraction of `workload_max`.
    pub soft_threshold: f64,
}

/// The RSU with the largest pending workload; ties go to the lowest id.
pub fn select_goal(nodes: &[EdgeNode]) -> Result<NodeId, DurpError> {
    nodes
        .iter()
        .filter(|n| n.is_rsu())
        .max_by(|a, b| a.workload.total_cmp(&b.workload).then(b.id.cmp(&a.id)))
        .map(|n| n.id)
        .ok_or(DurpError::NoRsu)
}

/// Moves excess RSU cycles onto the UAV's queue. RSUs are visited in id
/// order; each transfer is a whole number of cycles so the system total is
/// conserved exactly. Returns the cycles absorbed.
pub fn absorb_workload(uav: NodeId, nodes: &mut [EdgeNode], params: &AssistParams) -> Result<f64, DurpError> {
    if !(0.0..=1.0).contains(&params.absorb_rate) {
        return Err(DurpError::InvalidParameter(format!("absorb_rate {} outside [0, 1]", params.absorb_rate)));
    }
    let u = nodes.iter().position(|n| n.id == uav).ok_or(DurpError::UnknownNode(uav))?;
    let uav_pos = nodes[u].pos;
    let mut order: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i].is_rsu() && nodes[i].pos.horizontal_distance_to(&uav_pos) <= params.assist_radius)
        .collect();
    order.sort_by_key(|&i| nodes[i].id);

    let mut absorbed = 0.0;
    for i in order {
        let excess = nodes[i].workload - params.soft_threshold * nodes[i].workload_max;
        let spare = nodes[u].workload_max - nodes[u].workload;
        if excess <= 0.0 || spare <= 0.0 {
            continue;
        }
        let moved = (params.absorb_rate * excess.min(spare)).floor();
        if moved <= 0.0 {
            continue;
        }
        nodes[i].workload -= moved;
        nodes[u].workload += moved;
        absorbed += moved;
    }
    Ok(absorbed)
}

/// Chooses where a UAV flies next.
pub trait UavMover {
    fn decide(
        &mut self,
        graph: &RoutingGraph,
        current: usize,
        nodes: &[EdgeNode],
        energy: &EnergyModel,
    ) -> Result<Decision, DurpError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub next: usize,
    pub goal: Option<usize>,
    pub path_hops: usize,
}

impl Decision {
    fn hover(at: usize) -> Self {
        Self { next: at, goal: None, path_hops: 0 }
    }
}

fn vertex_loads(graph: &RoutingGraph, nodes: &[EdgeNode]) -> Vec<(f64, f64)> {
    (0..graph.len())
        .map(|v| {
            let id = graph.node_id(v);
            nodes.iter().find(|n| n.id == id).map(|n| (n.workload, n.normalized_workload())).unwrap_or((0.0, 0.0))
        })
        .collect()
}

/// A* replanning toward the most loaded RSU every slot.
#[derive(Debug, Clone, PartialEq)]
pub struct DurpPlanner {
    pub weights: HeuristicWeights,
    /// A new argmax must beat the current goal by more than this many cycles
    /// before the goal switches.
    pub hysteresis: f64,
    goal: Option<NodeId>,
}

impl DurpPlanner {
    pub fn new(weights: HeuristicWeights, hysteresis: f64) -> Self {
        Self { weights, hysteresis, goal: None }
    }

    pub fn goal(&self) -> Option<NodeId> {
        self.goal
    }

    fn update_goal(&mut self, nodes: &[EdgeNode]) -> Result<NodeId, DurpError> {
        let best = select_goal(nodes)?;
        let load = |id: NodeId| nodes.iter().find(|n| n.id == id).map(|n| n.workload);
        let goal = match self.goal.and_then(|g| load(g).map(|l| (g, l))) {
            Some((current, current_load)) if load(best).unwrap_or(0.0) - current_load <= self.hysteresis => current,
            _ => best,
        };
        self.goal = Some(goal);
        Ok(goal)
    }
}

impl UavMover for DurpPlanner {
    fn decide(
        &mut self,
        graph: &RoutingGraph,
        current: usize,
        nodes: &[EdgeNode],
        energy: &EnergyModel,
    ) -> Result<Decision, DurpError> {
        let goal_id = self.update_goal(nodes)?;
        let goal = graph.vertex_of(goal_id).ok_or(DurpError::UnknownNode(goal_id))?;
        let loads: Vec<f64> = vertex_loads(graph, nodes).into_iter().map(|(_, norm)| norm).collect();
        let ctx = HeuristicContext { graph, start: current, goal, energy, loads: &loads, weights: &self.weights };
        let plan = astar_search(graph, &ctx)?;
        Ok(Decision { next: plan.path.get(1).copied().unwrap_or(current), goal: Some(goal), path_hops: plan.hops() })
    }
}

/// Baseline: hop to a uniformly random neighbor every slot.
#[derive(Debug, Clone)]
pub struct RandomWalkMover {
    rng: ChaCha8Rng,
}

impl RandomWalkMover {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl UavMover for RandomWalkMover {
    fn decide(
        &mut self,
        graph: &RoutingGraph,
        current: usize,
        _: &[EdgeNode],
        _: &EnergyModel,
    ) -> Result<Decision, DurpError> {
        let nbrs = graph.neighbors(current);
        if nbrs.is_empty() {
            return Ok(Decision::hover(current));
        }
        let next = nbrs[self.rng.random_range(0..nbrs.len())].0;
        Ok(Decision { next, goal: Some(next), path_hops: 1 })
    }
}

/// Baseline: never leaves its start vertex.
#[derive(Debug, Clone, Copy, Default)]
pub struct StaticHoverMover;

impl UavMover for StaticHoverMover {
    fn decide(
        &mut self,
        _: &RoutingGraph,
        current: usize,
        _: &[EdgeNode],
        _: &EnergyModel,
    ) -> Result<Decision, DurpError> {
        Ok(Decision::hover(current))
    }
}

/// Baseline: heads for the nearest RSU above the soft threshold along the
/// shortest path, hovering when no RSU is overloaded.
#[derive(Debug, Clone, Copy)]
pub struct GreedyHotspotMover {
    pub soft_threshold: f64,
}

impl UavMover for GreedyHotspotMover {
    fn decide(
        &mut self,
        graph: &RoutingGraph,
        current: usize,
        nodes: &[EdgeNode],
        _: &EnergyModel,
    ) -> Result<Decision, DurpError> {
        let loads = vertex_loads(graph, nodes);
        let target = (0..graph.len())
            .filter(|&v| loads[v].1 > self.soft_threshold)
            .min_by(|&a, &b| graph.distance(current, a).total_cmp(&graph.distance(current, b)).then(a.cmp(&b)));
        let Some(goal) = target else {
            return Ok(Decision::hover(current));
        };
        let plan = astar_with(graph, current, goal, |n| {
            // admissible lower bound: cheapest per-meter edge cost times distance
            graph.distance(n, goal) * min_cost_per_meter(graph)
        })?;
        Ok(Decision { next: plan.path.get(1).copied().unwrap_or(current), goal: Some(goal), path_hops: plan.hops() })
    }
}

fn min_cost_per_meter(graph: &RoutingGraph) -> f64 {
    let mut best = f64::INFINITY;
    for v in 0..graph.len() {
        for &(m, w) in graph.neighbors(v) {
            let d = graph.distance(v, m);
            if d > 0.0 {
                best = best.min(w / d);
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

/// Outcome of one slot for one UAV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavStep {
    pub position: Position,
    pub vertex: usize,
    pub goal: Option<usize>,
    pub path_hops: usize,
    pub energy_mj: u64,
    pub moved: bool,
    pub grounded: bool,
}

/// A UAV flying over the routing graph, with its battery and realized trace.
#[derive(Debug, Clone, PartialEq)]
pub struct UavAgent {
    pub node: NodeId,
    pub vertex: usize,
    pub energy: EnergyModel,
    pub grounded: bool,
    pub trace: Vec<TraceEntry>,
    initial_mj: u64,
}

impl UavAgent {
    pub fn new(node: NodeId, vertex: usize, energy: EnergyModel) -> Self {
        let initial_mj = energy.battery_mj();
        Self { node, vertex, energy, grounded: initial_mj == 0, trace: Vec::new(), initial_mj }
    }

    pub fn initial_battery_mj(&self) -> u64 {
        self.initial_mj
    }

    pub fn position(&self, graph: &RoutingGraph) -> Position {
        graph.position(self.vertex)
    }

    /// One outer iteration: ask `mover` for the next hop, fly at most one edge,
    /// and pay move plus hover energy for the slot. A UAV that cannot pay is
    /// grounded for the rest of the mission.
    pub fn advance(
        &mut self,
        mover: &mut dyn UavMover,
        graph: &RoutingGraph,
        nodes: &[EdgeNode],
        slot_seconds: f64,
    ) -> Result<UavStep, DurpError> {
        let idle = |agent: &Self| UavStep {
            position: graph.position(agent.vertex),
            vertex: agent.vertex,
            goal: None,
            path_hops: 0,
            energy_mj: 0,
            moved: false,
            grounded: agent.grounded,
        };
        if self.grounded {
            return Ok(idle(self));
        }
        let decision = mover.decide(graph, self.vertex, nodes, &self.energy)?;
        if decision.next != self.vertex && graph.edge_weight(self.vertex, decision.next).is_none() {
            return Err(DurpError::InvalidParameter(format!(
                "mover chose non-adjacent hop {} -> {}",
                self.vertex, decision.next
            )));
        }
        let distance = graph.distance(self.vertex, decision.next);
        let entry = TraceEntry::new(&self.energy, distance, slot_seconds);
        if !self.energy.try_spend(entry.energy_mj) {
            self.grounded = true;
            return Ok(idle(self));
        }
        self.trace.push(entry);
        let moved = decision.next != self.vertex;
        self.vertex = decision.next;
        Ok(UavStep {
            position: graph.position(self.vertex),
            vertex: self.vertex,
            goal: decision.goal,
            path_hops: decision.path_hops,
            energy_mj: entry.energy_mj,
            moved,
            grounded: false,
        })
    }

    /// DURP outer-loop step: re-select the goal, re-plan, advance one edge.
    pub fn plan_and_step(
        &mut self,
        planner: &mut DurpPlanner,
        graph: &RoutingGraph,
        nodes: &[EdgeNode],
        slot_seconds: f64,
    ) -> Result<UavStep, DurpError> {
        self.advance(planner, graph, nodes, slot_seconds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::durp::{mission_energy, EnergyParams};
    use crate::sim::{ChannelParams, NodeKind};

    fn node(id: usize, kind: NodeKind, x: f64, y: f64, workload: f64) -> EdgeNode {
        EdgeNode {
            id: NodeId(id),
            kind,
            pos: Position::new(x, y, if kind == NodeKind::Uav { 100.0 } else { 0.0 }),
            compute: 6e10,
            workload,
            workload_max: 6e10,
            inter_node_bandwidth: 1e9,
            channel: ChannelParams::default(),
        }
    }

    fn line(loads: &[f64]) -> Vec<EdgeNode> {
        loads.iter().enumerate().map(|(i, &l)| node(i, NodeKind::Rsu, 500.0 * i as f64, 0.0, l)).collect()
    }

    fn params() -> AssistParams {
        AssistParams { assist_radius: 500.0, absorb_rate: 0.5, soft_threshold: 0.7 }
    }

    #[test]
    fn goal_is_argmax_with_low_id_ties() {
        assert_eq!(select_goal(&line(&[3.0, 9.0, 5.0])), Ok(NodeId(1)));
        assert_eq!(select_goal(&line(&[4.0, 4.0, 4.0])), Ok(NodeId(0)));
        assert_eq!(select_goal(&[node(0, NodeKind::Uav, 0.0, 0.0, 1.0)]), Err(DurpError::NoRsu));
    }

    #[test]
    fn absorb_examples() {
        let mut nodes = line(&[5e10, 1e10]);
        nodes.push(node(9, NodeKind::Uav, 5000.0, 0.0, 0.0));
        let before = nodes.clone();
        assert_eq!(absorb_workload(NodeId(9), &mut nodes, &params()).unwrap(), 0.0);
        assert_eq!(nodes, before);

        nodes[2].pos = Position::new(0.0, 0.0, 100.0);
        nodes[2].workload_max = 1e12;
        let zero = AssistParams { absorb_rate: 0.0, ..params() };
        absorb_workload(NodeId(9), &mut nodes, &zero).unwrap();
        assert_eq!(nodes[0].workload, 5e10);

        // threshold 0.7 * 6e10 = 4.2e10, so excess is 0.8e10 at node 0
        let moved = absorb_workload(NodeId(9), &mut nodes, &params()).unwrap();
        assert_eq!(moved, 4e9);
        assert_eq!(nodes[0].workload, 4.6e10);
        assert_eq!(nodes[2].workload, 4e9);
        let total: f64 = nodes.iter().map(|n| n.workload).sum();
        assert_eq!(total, before.iter().map(|n| n.workload).sum::<f64>());
    }

    #[test]
    fn absorb_is_capped_by_spare_capacity() {
        let mut nodes = line(&[6e10]);
        let mut uav = node(5, NodeKind::Uav, 0.0, 0.0, 0.0);
        uav.workload_max = 2e9;
        nodes.push(uav);
        let moved = absorb_workload(NodeId(5), &mut nodes, &AssistParams { absorb_rate: 1.0, ..params() }).unwrap();
        assert_eq!(moved, 2e9);
        assert!(absorb_workload(NodeId(5), &mut nodes, &AssistParams { absorb_rate: 1.5, ..params() }).is_err());
    }

    fn setup(loads: &[f64]) -> (RoutingGraph, Vec<EdgeNode>, UavAgent, DurpPlanner) {
        let nodes = line(loads);
        let graph = RoutingGraph::over_rsus(&nodes, 100.0, 500.0, 2.0);
        let energy = EnergyModel::new(&EnergyParams { hover_power: 100.0, move_energy_per_meter: 2.0, battery: 1e5 });
        let agent = UavAgent::new(NodeId(99), 0, energy);
        (graph, nodes, agent, DurpPlanner::new(HeuristicWeights::default(), 1.0))
    }

    #[test]
    fn hovers_at_goal() {
        let (g, nodes, mut uav, mut planner) = setup(&[9.0, 1.0, 2.0]);
        let before = uav.energy.battery_mj();
        let step = uav.plan_and_step(&mut planner, &g, &nodes, 1.0).unwrap();
        assert!(!step.moved);
        assert_eq!(step.vertex, 0);
        assert_eq!(before - uav.energy.battery_mj(), 100_000);
    }

    #[test]
    fn progresses_one_edge_per_call() {
        let (g, nodes, mut uav, mut planner) = setup(&[1.0, 2.0, 3.0, 4.0, 9.0]);
        uav.plan_and_step(&mut planner, &g, &nodes, 1.0).unwrap();
        assert_eq!(uav.vertex, 1);
        let s = uav.plan_and_step(&mut planner, &g, &nodes, 1.0).unwrap();
        assert_eq!(uav.vertex, 2);
        assert_eq!(s.goal, Some(4));
        assert_eq!(s.energy_mj, 1_100_000);
    }

    #[test]
    fn replans_after_workload_flip() {
        let (g, mut nodes, mut uav, mut planner) = setup(&[1.0, 2.0, 3.0, 4.0, 9.0]);
        uav.vertex = 2;
        uav.plan_and_step(&mut planner, &g, &nodes, 1.0).unwrap();
        assert_eq!(uav.vertex, 3);
        nodes[0].workload = 50.0;
        let s = uav.plan_and_step(&mut planner, &g, &nodes, 1.0).unwrap();
        assert_eq!(s.goal, Some(0));
        assert_eq!(uav.vertex, 2);
    }

    #[test]
    fn hysteresis_keeps_goal_on_near_ties() {
        let (g, mut nodes, mut uav, mut planner) = setup(&[1.0, 2.0, 9.0]);
        planner.hysteresis = 5.0;
        uav.plan_and_step(&mut planner, &g, &nodes, 1.0).unwrap();
        nodes[0].workload = 12.0;
        uav.plan_and_step(&mut planner, &g, &nodes, 1.0).unwrap();
        assert_eq!(planner.goal(), Some(NodeId(2)));
        nodes[0].workload = 15.0;
        uav.plan_and_step(&mut planner, &g, &nodes, 1.0).unwrap();
        assert_eq!(planner.goal(), Some(NodeId(0)));
    }

    #[test]
    fn grounded_when_battery_runs_out() {
        let (g, nodes, _, mut planner) = setup(&[1.0, 9.0]);
        let energy =
            EnergyModel::new(&EnergyParams { hover_power: 100.0, move_energy_per_meter: 2.0, battery: 1500.0 });
        let mut uav = UavAgent::new(NodeId(7), 0, energy);
        let s = uav.plan_and_step(&mut planner, &g, &nodes, 1.0).unwrap();
        assert!(s.moved);
        // 400 J left after the first move: four more hovers, then grounded
        for _ in 0..4 {
            let s = uav.plan_and_step(&mut planner, &g, &nodes, 1.0).unwrap();
            assert!(!s.grounded && !s.moved);
        }
        let s = uav.plan_and_step(&mut planner, &g, &nodes, 1.0).unwrap();
        assert!(s.grounded);
        assert_eq!(uav.energy.battery_mj(), 0);
        assert_eq!(uav.initial_battery_mj() - uav.energy.battery_mj(), (mission_energy(&uav.trace) * 1000.0) as u64);
        let after = uav.plan_and_step(&mut planner, &g, &nodes, 1.0).unwrap();
        assert!(after.grounded && !after.moved);
    }

    #[test]
    fn baselines_move_as_described() {
        let (g, nodes, uav, _) = setup(&[1.0, 2e10, 5e10, 1.0]);
        let e = uav.energy;
        assert_eq!(StaticHoverMover.decide(&g, 1, &nodes, &e).unwrap().next, 1);
        let mut rw = RandomWalkMover::new(3);
        for _ in 0..20 {
            let d = rw.decide(&g, 1, &nodes, &e).unwrap();
            assert!(d.next == 0 || d.next == 2);
        }
        let mut greedy = GreedyHotspotMover { soft_threshold: 0.7 };
        let d = greedy.decide(&g, 0, &nodes, &e).unwrap();
        assert_eq!((d.next, d.goal), (1, Some(2)));
        let calm = line(&[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(greedy.decide(&g, 0, &calm, &e).unwrap().next, 0);
    }
}
