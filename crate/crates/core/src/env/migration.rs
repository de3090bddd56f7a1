use serde::{Deserialize, Serialize};

use super::{EnvError, Environment, StepResult};
use crate::durp::{
    absorb_workload, AssistParams, DurpPlanner, EnergyModel, EnergyParams, HeuristicWeights, RoutingGraph, UavAgent,
};
use crate::sim::{
    processing_latency, step_world, total_latency, LatencyBreakdown, NodeId, NodeKind, TaskSpec, WorldConfig,
    WorldState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MdpSettings {
    /// Size of the ratio grid `{0, 1/n, ..., (n-1)/n}`.
    pub alpha_bins: usize,
    /// Reward penalty per violated workload constraint.
    pub penalty: f64,
    /// Latency normalizer in seconds; the median single-RSU latency at reset when unset.
    pub t_norm: Option<f64>,
    /// Normalized workloads in the observation are clipped to `[0, 1 + overload_eps]`.
    pub overload_eps: f64,
    /// Choose only the ratio; the target is the least loaded eligible node.
    pub alpha_only: bool,
    /// UAVs fly, absorb load and accept pre-migrations.
    pub uav_assist: bool,
}

impl Default for MdpSettings {
    fn default() -> Self {
        Self { alpha_bins: 10, penalty: 1.0, t_norm: None, overload_eps: 1.0, alpha_only: false, uav_assist: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskParams {
    /// Task size in bits.
    pub size_bits: f64,
    /// Result size returned over the downlink, in bits.
    pub result_bits: f64,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self { size_bits: 5.0e7, result_bits: 1.0e7 }
    }
}

/// UAV fleet wiring for the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetSpec {
    pub graph: RoutingGraph,
    /// World node id of each UAV and its starting graph vertex.
    pub uavs: Vec<(NodeId, usize)>,
    pub energy: EnergyParams,
    pub weights: HeuristicWeights,
    pub hysteresis: f64,
    pub assist: AssistParams,
}

/// Everything needed to build a [`VtMigrationEnv`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub world: WorldConfig,
    pub initial: WorldState,
    pub task: TaskParams,
    pub uplink_latency: f64,
    pub mdp: MdpSettings,
    pub fleet: Option<FleetSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationAction {
    pub target: NodeId,
    /// Index into the ratio grid; 0 means no pre-migration.
    pub alpha_bin: usize,
}

/// `-T / t_norm - penalty * violations`.
pub fn compute_reward(lat: &LatencyBreakdown, violations: usize, t_norm: f64, penalty: f64) -> f64 {
    -lat.total / t_norm - penalty * violations as f64
}

#[derive(Debug, Clone)]
pub struct VtMigrationEnv {
    spec: EnvSpec,
    state: WorldState,
    uavs: Vec<(UavAgent, DurpPlanner)>,
    t_norm: f64,
    bbox: [f64; 4],
    max_speed: f64,
}

/// Outcome of applying an action without advancing the world.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionOutcome {
    pub latency: LatencyBreakdown,
    pub violations: usize,
    pub assignments: Vec<(NodeId, f64)>,
}

impl VtMigrationEnv {
    pub fn new(spec: EnvSpec) -> Result<Self, EnvError> {
        spec.initial.validate()?;
        if spec.mdp.alpha_bins < 1 {
            return Err(EnvError::Config("alpha_bins must be >= 1".into()));
        }
        if !(spec.mdp.penalty >= 0.0) {
            return Err(EnvError::Config("penalty must be >= 0".into()));
        }
        if let Some(t) = spec.mdp.t_norm {
            if !(t > 0.0 && t.is_finite()) {
                return Err(EnvError::Config("t_norm must be > 0".into()));
            }
        }
        TaskSpec::with_ratio(spec.task.size_bits, spec.task.result_bits, 0.0)?;
        if let Some(fleet) = &spec.fleet {
            for &(id, v) in &fleet.uavs {
                match spec.initial.node(id) {
                    Some(n) if n.kind == NodeKind::Uav => {}
                    _ => return Err(EnvError::Config(format!("fleet UAV {id} is not a UAV node"))),
                }
                if v >= fleet.graph.len() {
                    return Err(EnvError::Config(format!("UAV {id} starts at unknown vertex {v}")));
                }
            }
        }
        let bbox = bounding_box(&spec);
        let max_speed = spec.world.route.speed.abs();
        let mut env = Self { state: spec.initial.clone(), spec, uavs: Vec::new(), t_norm: 1.0, bbox, max_speed };
        env.reset_inner(env.spec.initial.rng_seed)?;
        Ok(env)
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn t_norm(&self) -> f64 {
        self.t_norm
    }

    pub fn uav_agents(&self) -> impl Iterator<Item = &UavAgent> {
        self.uavs.iter().map(|(a, _)| a)
    }

    fn assist_active(&self) -> bool {
        self.spec.mdp.uav_assist && self.spec.fleet.is_some()
    }

    fn reset_inner(&mut self, seed: u64) -> Result<(), EnvError> {
        let mut state = self.spec.initial.clone();
        state.rng_seed = seed;
        self.uavs.clear();
        if let Some(fleet) = &self.spec.fleet {
            for &(id, v) in &fleet.uavs {
                let agent = UavAgent::new(id, v, EnergyModel::new(&fleet.energy));
                let idx = state.node_index(id).expect("validated");
                state.nodes[idx].pos = fleet.graph.position(v);
                self.uavs.push((agent, DurpPlanner::new(fleet.weights, fleet.hysteresis)));
            }
        }
        self.state = state;
        self.t_norm = match self.spec.mdp.t_norm {
            Some(t) => t,
            None => self.median_single_rsu_latency()?,
        };
        Ok(())
    }

    fn median_single_rsu_latency(&self) -> Result<f64, EnvError> {
        let task = self.task(0)?;
        let veh = &self.state.vehicle;
        let mut lats: Vec<f64> = self
            .state
            .rsus()
            .filter_map(|n| total_latency(&task, n, n, veh, self.spec.uplink_latency).ok())
            .map(|l| l.total)
            .collect();
        if lats.is_empty() {
            return Ok(1.0);
        }
        lats.sort_by(f64::total_cmp);
        let m = lats.len();
        let med = if m % 2 == 1 { lats[m / 2] } else { 0.5 * (lats[m / 2 - 1] + lats[m / 2]) };
        Ok(if med > 0.0 { med } else { 1.0 })
    }

    fn alpha(&self, bin: usize) -> f64 {
        bin as f64 / self.spec.mdp.alpha_bins as f64
    }

    fn task(&self, bin: usize) -> Result<TaskSpec, EnvError> {
        Ok(TaskSpec::with_ratio(self.spec.task.size_bits, self.spec.task.result_bits, self.alpha(bin))?)
    }

    /// Nodes that may receive a pre-migration now: every RSU but the serving
    /// one, plus active UAVs within the assist radius of the serving RSU.
    pub fn eligible_targets(&self) -> Vec<NodeId> {
        let serving = self.state.serving_node();
        let radius = self.spec.fleet.as_ref().map(|f| f.assist.assist_radius).unwrap_or(0.0);
        let mut out: Vec<NodeId> = self
            .state
            .nodes
            .iter()
            .filter(|n| n.id != serving.id)
            .filter(|n| match n.kind {
                NodeKind::Rsu => true,
                NodeKind::Uav => {
                    self.assist_active()
                        && self.uavs.iter().any(|(a, _)| a.node == n.id && !a.grounded)
                        && n.pos.horizontal_distance_to(&serving.pos) <= radius
                }
            })
            .map(|n| n.id)
            .collect();
        out.sort();
        out
    }

    fn alpha_only_target(&self) -> Option<NodeId> {
        let eligible = self.eligible_targets();
        eligible
            .iter()
            .filter_map(|id| self.state.node(*id))
            .min_by(|a, b| a.normalized_workload().total_cmp(&b.normalized_workload()).then(a.id.cmp(&b.id)))
            .map(|n| n.id)
    }

    /// Valid actions in stable order: no pre-migration first, then by node id
    /// and ratio bin.
    pub fn action_space(&self) -> Vec<MigrationAction> {
        let serving = self.state.serving;
        let bins = self.spec.mdp.alpha_bins;
        let mut out = vec![MigrationAction { target: serving, alpha_bin: 0 }];
        if self.spec.mdp.alpha_only {
            if let Some(t) = self.alpha_only_target() {
                out.extend((1..bins).map(|b| MigrationAction { target: t, alpha_bin: b }));
            }
        } else {
            for id in self.eligible_targets() {
                out.extend((1..bins).map(|b| MigrationAction { target: id, alpha_bin: b }));
            }
        }
        out
    }

    pub fn action_index(&self, action: &MigrationAction) -> Option<usize> {
        if action.alpha_bin == 0 {
            return Some(0);
        }
        if action.alpha_bin >= self.spec.mdp.alpha_bins {
            return None;
        }
        if self.spec.mdp.alpha_only {
            return Some(action.alpha_bin);
        }
        let k = self.state.node_index(action.target)?;
        Some(1 + k * (self.spec.mdp.alpha_bins - 1) + action.alpha_bin - 1)
    }

    /// Maps a global index to an action in the current state, or `None` when
    /// that action is not valid now.
    pub fn decode(&self, index: usize) -> Option<MigrationAction> {
        let bins = self.spec.mdp.alpha_bins;
        let serving = self.state.serving;
        if index == 0 {
            return Some(MigrationAction { target: serving, alpha_bin: 0 });
        }
        if index >= self.action_count() {
            return None;
        }
        let action = if self.spec.mdp.alpha_only {
            MigrationAction { target: self.alpha_only_target()?, alpha_bin: index }
        } else {
            let k = (index - 1) / (bins - 1);
            let bin = (index - 1) % (bins - 1) + 1;
            MigrationAction { target: self.state.nodes[k].id, alpha_bin: bin }
        };
        self.action_space().contains(&action).then_some(action)
    }

    /// Latency, constraint violations and workload assignments of `action`
    /// in the current state. Does not change the world.
    pub fn evaluate(&self, action: &MigrationAction) -> Result<ActionOutcome, EnvError> {
        let task = self.task(action.alpha_bin)?;
        let serving = self.state.serving_node();
        let premig = self.state.node(action.target).ok_or(crate::sim::SimError::UnknownNode(action.target))?;
        let latency = total_latency(&task, serving, premig, &self.state.vehicle, self.spec.uplink_latency)?;
        let f = self.state.vehicle.cycles_per_bit;
        let local = task.local_bits() * f;
        let moved = task.premigrated * f;
        let mut violations = usize::from(serving.workload + local > serving.workload_max);
        let mut assignments = vec![(serving.id, local)];
        if action.alpha_bin > 0 {
            violations += usize::from(premig.workload + moved > premig.workload_max);
            assignments.push((premig.id, moved));
        }
        Ok(ActionOutcome { latency, violations, assignments })
    }

    /// Exhaustive one-step search: the valid action of least latency, ties to
    /// the lower global index.
    pub fn best_action(&self) -> Result<(usize, LatencyBreakdown), EnvError> {
        let mut best: Option<(usize, LatencyBreakdown)> = None;
        for action in self.action_space() {
            let idx = self.action_index(&action).expect("valid action has an index");
            let lat = self.evaluate(&action)?.latency;
            let better = match &best {
                None => true,
                Some((bi, bl)) => lat.total < bl.total || (lat.total == bl.total && idx < *bi),
            };
            if better {
                best = Some((idx, lat));
            }
        }
        Ok(best.expect("no-migration is always valid"))
    }

    /// Latency of serving the whole task on the serving node.
    pub fn no_migration_latency(&self) -> Result<LatencyBreakdown, EnvError> {
        Ok(self.evaluate(&MigrationAction { target: self.state.serving, alpha_bin: 0 })?.latency)
    }

    /// Processing-only latency for `bits` on `node`; exposed for baselines.
    pub fn processing_on(&self, node: NodeId, bits: f64) -> Option<f64> {
        self.state.node(node).map(|n| processing_latency(n, bits, &self.state.vehicle))
    }

    fn advance_uavs(&mut self) -> Result<(), EnvError> {
        if !self.assist_active() {
            return Ok(());
        }
        let fleet = self.spec.fleet.as_ref().expect("assist requires a fleet");
        let dt = self.spec.world.slot_seconds;
        for (agent, planner) in self.uavs.iter_mut() {
            if agent.grounded {
                continue;
            }
            let step = agent.plan_and_step(planner, &fleet.graph, &self.state.nodes, dt)?;
            let idx = self.state.node_index(agent.node).expect("validated");
            self.state.nodes[idx].pos = step.position;
            if !step.grounded {
                absorb_workload(agent.node, &mut self.state.nodes, &fleet.assist)?;
            }
        }
        Ok(())
    }

    pub fn observe(&self) -> Vec<f64> {
        let s = &self.state;
        let [x0, y0, x1, y1] = self.bbox;
        let nx = |x: f64| if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.5 };
        let ny = |y: f64| if y1 > y0 { (y - y0) / (y1 - y0) } else { 0.5 };
        let mut obs = Vec::with_capacity(self.obs_dim());
        obs.push(nx(s.vehicle.pos.x));
        obs.push(ny(s.vehicle.pos.y));
        for v in s.vehicle.velocity {
            obs.push(if self.max_speed > 0.0 { v / self.max_speed } else { 0.0 });
        }
        for n in s.rsus() {
            obs.push(if n.id == s.serving { 1.0 } else { 0.0 });
        }
        let cap = 1.0 + self.spec.mdp.overload_eps;
        for n in &s.nodes {
            obs.push(n.normalized_workload().clamp(0.0, cap));
        }
        let eligible = self.eligible_targets();
        for n in &s.nodes {
            let flag = match n.kind {
                NodeKind::Rsu => n.pos.distance_to(&s.vehicle.pos) <= self.spec.world.coverage_radius,
                NodeKind::Uav => eligible.contains(&n.id),
            };
            obs.push(if flag { 1.0 } else { 0.0 });
        }
        for n in s.nodes.iter().filter(|n| n.kind == NodeKind::Uav) {
            obs.push(nx(n.pos.x));
            obs.push(ny(n.pos.y));
        }
        obs.push(s.time_slot as f64 / s.t_max as f64);
        obs
    }
}

fn bounding_box(spec: &EnvSpec) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    let mut add = |x: f64, y: f64| {
        b[0] = b[0].min(x);
        b[1] = b[1].min(y);
        b[2] = b[2].max(x);
        b[3] = b[3].max(y);
    };
    for n in spec.initial.nodes.iter().filter(|n| n.is_rsu()) {
        add(n.pos.x, n.pos.y);
    }
    for w in &spec.world.route.waypoints {
        add(w[0], w[1]);
    }
    add(spec.initial.vehicle.pos.x, spec.initial.vehicle.pos.y);
    b
}

impl Environment for VtMigrationEnv {
    fn obs_dim(&self) -> usize {
        let n = self.state.nodes.len();
        let rsus = self.state.rsus().count();
        let uavs = n - rsus;
        2 + 2 + rsus + 2 * n + 2 * uavs + 1
    }

    fn action_count(&self) -> usize {
        let bins = self.spec.mdp.alpha_bins;
        if self.spec.mdp.alpha_only {
            bins
        } else {
            1 + self.state.nodes.len() * (bins - 1)
        }
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>, EnvError> {
        self.reset_inner(seed)?;
        Ok(self.observe())
    }

    fn action_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.action_count()];
        for a in self.action_space() {
            if let Some(i) = self.action_index(&a) {
                mask[i] = true;
            }
        }
        mask
    }

    fn step(&mut self, index: usize) -> Result<StepResult, EnvError> {
        let action = self.decode(index).ok_or(EnvError::InvalidAction { index, count: self.action_count() })?;
        let outcome = self.evaluate(&action)?;
        let reward = compute_reward(&outcome.latency, outcome.violations, self.t_norm, self.spec.mdp.penalty);
        let done = self.state.is_final_slot();
        if !done {
            self.advance_uavs()?;
            self.state = step_world(&self.spec.world, &self.state, &outcome.assignments)?;
        }
        Ok(StepResult { obs: self.observe(), reward, done, truncated: false, latency: outcome.latency.total })
    }
}
