//! Scenario files: a TOML description of the grid, nodes, vehicle, UAVs and
//! background demand, plus builders for the simulation and the environment.
//!
//! Every key has a default, so an empty file describes the 16-RSU desk
//! scenario. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::durp::{AssistParams, EnergyParams, HeuristicWeights, RoutingGraph};
use crate::env::{EnvError, EnvSpec, FleetSpec, MdpSettings, TaskParams, VtMigrationEnv};
use crate::sim::{
    select_serving, BackgroundParams, ChannelParams, EdgeNode, NodeId, NodeKind, Position, Route, SimError,
    VehicleState, WorldConfig, WorldState,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Meters between neighboring RSUs.
    pub spacing: f64,
    /// Position of RSU 0; RSUs are numbered row-major.
    pub origin: [f64; 2],
    pub coverage_radius: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { rows: 4, cols: 4, spacing: 500.0, origin: [0.0, 0.0], coverage_radius: 400.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RsuSpec {
    /// cycles/s
    pub compute: f64,
    /// cycles
    pub workload_max: f64,
    /// cycles
    pub initial_workload: f64,
    /// bits/s to other edge nodes
    pub inter_node_bandwidth: f64,
    pub channel: ChannelParams,
    pub overrides: Vec<RsuOverride>,
}

impl Default for RsuSpec {
    fn default() -> Self {
        Self {
            compute: 6.0e10,
            workload_max: 6.0e10,
            initial_workload: 0.0,
            inter_node_bandwidth: 1.0e9,
            channel: ChannelParams::default(),
            overrides: Vec::new(),
        }
    }
}

/// Per-RSU exceptions to [`RsuSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsuOverride {
    pub index: usize,
    pub compute: Option<f64>,
    pub workload_max: Option<f64>,
    pub initial_workload: Option<f64>,
    pub inter_node_bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssistSpec {
    /// Horizontal meters; the grid spacing when unset.
    pub radius: Option<f64>,
    pub absorb_rate: f64,
    pub soft_threshold: f64,
}

impl Default for AssistSpec {
    fn default() -> Self {
        Self { radius: None, absorb_rate: 0.5, soft_threshold: 0.7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UavSpec {
    pub count: usize,
    pub altitude: f64,
    /// Half the RSU compute when unset.
    pub compute: Option<f64>,
    /// The RSU limit when unset.
    pub workload_max: Option<f64>,
    pub inter_node_bandwidth: Option<f64>,
    pub channel: Option<ChannelParams>,
    /// RSU index each UAV starts above; UAV `i` uses entry `i`, or `i` itself
    /// when the list is short.
    pub start: Vec<usize>,
    /// Longest routing-graph edge; the grid spacing when unset (4-neighbor grid).
    pub max_edge: Option<f64>,
    pub energy: EnergyParams,
    pub heuristic: HeuristicWeights,
    /// Goal switching margin in cycles.
    pub hysteresis: f64,
    pub assist: AssistSpec,
}

impl Default for UavSpec {
    fn default() -> Self {
        Self {
            count: 1,
            altitude: 100.0,
            compute: None,
            workload_max: None,
            inter_node_bandwidth: None,
            channel: None,
            start: vec![0],
            max_edge: None,
            energy: EnergyParams::default(),
            heuristic: HeuristicWeights::default(),
            hysteresis: 1.0,
            assist: AssistSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleSpec {
    /// W
    pub transmit_power: f64,
    /// cycles/bit
    pub cycles_per_bit: f64,
    /// m/s
    pub speed: f64,
    /// Closed loop of waypoints; a rectangle half a spacing inside the grid
    /// when empty.
    pub route: Vec<[f64; 2]>,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        Self { transmit_power: 0.2, cycles_per_bit: 100.0, speed: 15.0, route: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackgroundSpec {
    /// Utilization shared by every RSU.
    pub base: f64,
    pub hotspot_nodes: Vec<usize>,
    /// Extra utilization on hotspot RSUs.
    pub hotspot_level: f64,
    pub walk_step: f64,
    pub walk_max: f64,
    /// Cycles/s per unit utilization; the RSU default compute when unset.
    pub reference_compute: Option<f64>,
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        Self {
            base: 0.2,
            hotspot_nodes: vec![5, 6, 9, 10],
            hotspot_level: 0.7,
            walk_step: 0.05,
            walk_max: 0.3,
            reference_compute: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    /// Slots per episode.
    pub t_max: usize,
    pub slot_seconds: f64,
    pub uplink_latency: f64,
    pub grid: GridSpec,
    pub rsu: RsuSpec,
    pub uav: UavSpec,
    pub vehicle: VehicleSpec,
    pub task: TaskParams,
    pub background: BackgroundSpec,
    pub mdp: MdpSettings,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "grid16".into(),
            seed: 0,
            t_max: 1000,
            slot_seconds: 1.0,
            uplink_latency: 0.0,
            grid: GridSpec::default(),
            rsu: RsuSpec::default(),
            uav: UavSpec::default(),
            vehicle: VehicleSpec::default(),
            task: TaskParams::default(),
            background: BackgroundSpec::default(),
            mdp: MdpSettings::default(),
        }
    }
}

impl Scenario {
    /// Two RSUs 500 m apart, a parked vehicle served by RSU 0, and a
    /// background hotspot that keeps RSU 0 overloaded unless work is moved.
    pub fn toy() -> Self {
        Self {
            name: "toy2".into(),
            t_max: 50,
            grid: GridSpec { rows: 1, cols: 2, ..GridSpec::default() },
            uav: UavSpec { count: 0, ..UavSpec::default() },
            vehicle: VehicleSpec {
                speed: 0.0,
                route: vec![[100.0, 0.0]],
                cycles_per_bit: 200.0,
                ..VehicleSpec::default()
            },
            task: TaskParams { size_bits: 3.0e8, result_bits: 1.0e7 },
            background: BackgroundSpec {
                base: 0.0,
                hotspot_nodes: vec![0],
                hotspot_level: 0.8,
                walk_step: 0.05,
                walk_max: 0.1,
                reference_compute: None,
            },
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let s: Self = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, ScenarioError> {
        toml::to_string(self).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn rsu_count(&self) -> usize {
        self.grid.rows * self.grid.cols
    }

    /// Sets the compute of every RSU, overrides included. Background demand
    /// and UAV compute keep the values they had, so the offered load stays put.
    pub fn with_rsu_compute(mut self, compute: f64) -> Self {
        self.background.reference_compute.get_or_insert(self.rsu.compute);
        self.uav.compute.get_or_insert(0.5 * self.rsu.compute);
        self.rsu.compute = compute;
        for o in &mut self.rsu.overrides {
            o.compute = None;
        }
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        let n = self.rsu_count();
        if n == 0 {
            return bad("grid must hold at least one RSU".into());
        }
        if self.t_max == 0 {
            return bad("t_max must be >= 1".into());
        }
        if !(self.slot_seconds > 0.0 && self.slot_seconds.is_finite()) {
            return bad(format!("slot_seconds {} must be > 0", self.slot_seconds));
        }
        if !(self.uplink_latency >= 0.0 && self.uplink_latency.is_finite()) {
            return bad("uplink_latency must be >= 0".into());
        }
        if !(self.grid.spacing > 0.0 && self.grid.coverage_radius > 0.0) {
            return bad("grid spacing and coverage radius must be > 0".into());
        }
        for o in &self.rsu.overrides {
            if o.index >= n {
                return bad(format!("rsu override index {} out of range (0..{n})", o.index));
            }
        }
        for &h in &self.background.hotspot_nodes {
            if h >= n {
                return bad(format!("hotspot node {h} out of range (0..{n})"));
            }
        }
        for &s in &self.uav.start {
            if s >= n {
                return bad(format!("uav start {s} out of range (0..{n})"));
            }
        }
        if self.uav.count > 0 && self.uav.start.len() < self.uav.count && self.uav.count > n {
            return bad("more UAVs than start positions".into());
        }
        if !(0.0..=1.0).contains(&self.uav.assist.absorb_rate) {
            return bad("assist absorb_rate must lie in [0, 1]".into());
        }
        if !self.uav.heuristic.is_finite() || !(self.uav.hysteresis >= 0.0) {
            return bad("heuristic weights must be finite and hysteresis >= 0".into());
        }
        let e = &self.uav.energy;
        if !(e.hover_power >= 0.0 && e.move_energy_per_meter >= 0.0 && e.battery >= 0.0) {
            return bad("energy constants must be >= 0".into());
        }
        let b = &self.background;
        if !(b.base >= 0.0 && b.hotspot_level >= 0.0 && b.walk_step >= 0.0 && b.walk_max >= 0.0) {
            return bad("background parameters must be >= 0".into());
        }
        if !(self.vehicle.speed >= 0.0 && self.vehicle.speed.is_finite()) {
            return bad("vehicle speed must be >= 0".into());
        }
        if self.mdp.alpha_bins < 1 {
            return bad("mdp alpha_bins must be >= 1".into());
        }
        self.initial_state()?.validate()?;
        Ok(())
    }

    fn rsu_position(&self, i: usize) -> Position {
        let (r, c) = (i / self.grid.cols, i % self.grid.cols);
        Position::ground(
            self.grid.origin[0] + c as f64 * self.grid.spacing,
            self.grid.origin[1] + r as f64 * self.grid.spacing,
        )
    }

    /// The vehicle loop; defaults to a rectangle half a spacing inside the grid.
    pub fn route(&self) -> Route {
        let waypoints = if self.vehicle.route.is_empty() {
            let span = |n: usize, o: f64| {
                if n >= 2 {
                    (o + 0.5 * self.grid.spacing, o + (n as f64 - 1.5) * self.grid.spacing)
                } else {
                    (o, o)
                }
            };
            let (x0, x1) = span(self.grid.cols, self.grid.origin[0]);
            let (y0, y1) = span(self.grid.rows, self.grid.origin[1]);
            if x0 == x1 && y0 == y1 {
                vec![[x0, y0]]
            } else {
                vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
            }
        } else {
            self.vehicle.route.clone()
        };
        Route { waypoints, speed: self.vehicle.speed }
    }

    pub fn world_config(&self) -> WorldConfig {
        let n = self.rsu_count();
        let mut hotspot = vec![0.0; n + self.uav.count];
        for &h in &self.background.hotspot_nodes {
            hotspot[h] = self.background.hotspot_level;
        }
        WorldConfig {
            slot_seconds: self.slot_seconds,
            coverage_radius: self.grid.coverage_radius,
            route: self.route(),
            background: BackgroundParams {
                base: self.background.base,
                hotspot,
                walk_step: self.background.walk_step,
                walk_max: self.background.walk_max,
                reference_compute: Some(self.background.reference_compute.unwrap_or(self.rsu.compute)),
            },
        }
    }

    fn uav_start(&self, i: usize) -> usize {
        self.uav.start.get(i).copied().unwrap_or(i % self.rsu_count())
    }

    fn nodes(&self) -> Vec<EdgeNode> {
        let n = self.rsu_count();
        let mut nodes: Vec<EdgeNode> = (0..n)
            .map(|i| EdgeNode {
                id: NodeId(i),
                kind: NodeKind::Rsu,
                pos: self.rsu_position(i),
                compute: self.rsu.compute,
                workload: self.rsu.initial_workload,
                workload_max: self.rsu.workload_max,
                inter_node_bandwidth: self.rsu.inter_node_bandwidth,
                channel: self.rsu.channel,
            })
            .collect();
        for o in &self.rsu.overrides {
            let node = &mut nodes[o.index];
            node.compute = o.compute.unwrap_or(node.compute);
            node.workload_max = o.workload_max.unwrap_or(node.workload_max);
            node.workload = o.initial_workload.unwrap_or(node.workload);
            node.inter_node_bandwidth = o.inter_node_bandwidth.unwrap_or(node.inter_node_bandwidth);
        }
        for u in 0..self.uav.count {
            let above = self.rsu_position(self.uav_start(u));
            nodes.push(EdgeNode {
                id: NodeId(n + u),
                kind: NodeKind::Uav,
                pos: Position::new(above.x, above.y, self.uav.altitude),
                compute: self.uav.compute.unwrap_or(0.5 * self.rsu.compute),
                workload: 0.0,
                workload_max: self.uav.workload_max.unwrap_or(self.rsu.workload_max),
                inter_node_bandwidth: self.uav.inter_node_bandwidth.unwrap_or(self.rsu.inter_node_bandwidth),
                channel: self.uav.channel.unwrap_or(self.rsu.channel),
            });
        }
        nodes
    }

    /// Slot-1 world with the scenario seed.
    pub fn initial_state(&self) -> Result<WorldState, ScenarioError> {
        let nodes = self.nodes();
        let route = self.route();
        let (xy, dir) = route.point_at(0.0);
        let pos = Position::ground(xy[0], xy[1]);
        let serving = select_serving(&nodes, &pos, self.grid.coverage_radius)
            .ok_or_else(|| ScenarioError::Invalid("world has no RSU".into()))?;
        Ok(WorldState {
            time_slot: 1,
            t_max: self.t_max,
            walk: vec![0.0; nodes.len()],
            nodes,
            vehicle: VehicleState {
                pos,
                velocity: [dir[0] * route.speed, dir[1] * route.speed],
                transmit_power: self.vehicle.transmit_power,
                cycles_per_bit: self.vehicle.cycles_per_bit,
            },
            serving,
            rng_seed: self.seed,
            route_progress: 0.0,
        })
    }

    pub fn routing_graph(&self) -> RoutingGraph {
        let rsus: Vec<EdgeNode> = self.nodes().into_iter().filter(|n| n.is_rsu()).collect();
        RoutingGraph::over_rsus(
            &rsus,
            self.uav.altitude,
            self.uav.max_edge.unwrap_or(self.grid.spacing),
            self.uav.energy.move_energy_per_meter,
        )
    }

    pub fn assist_params(&self) -> AssistParams {
        AssistParams {
            assist_radius: self.uav.assist.radius.unwrap_or(self.grid.spacing),
            absorb_rate: self.uav.assist.absorb_rate,
            soft_threshold: self.uav.assist.soft_threshold,
        }
    }

    /// UAV world ids with their starting graph vertices.
    pub fn uav_starts(&self) -> Vec<(NodeId, usize)> {
        let n = self.rsu_count();
        (0..self.uav.count).map(|u| (NodeId(n + u), self.uav_start(u))).collect()
    }

    pub fn fleet_spec(&self) -> Option<FleetSpec> {
        (self.uav.count > 0).then(|| FleetSpec {
            graph: self.routing_graph(),
            uavs: self.uav_starts(),
            energy: self.uav.energy,
            weights: self.uav.heuristic,
            hysteresis: self.uav.hysteresis,
            assist: self.assist_params(),
        })
    }

    pub fn env_spec(&self) -> Result<EnvSpec, ScenarioError> {
        Ok(EnvSpec {
            world: self.world_config(),
            initial: self.initial_state()?,
            task: self.task,
            uplink_latency: self.uplink_latency,
            mdp: self.mdp.clone(),
            fleet: self.fleet_spec(),
        })
    }

    pub fn build_env(&self) -> Result<VtMigrationEnv, ScenarioError> {
        self.validate()?;
        Ok(VtMigrationEnv::new(self.env_spec()?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Environment;

    #[test]
    fn empty_file_is_the_default_grid() {
        let s = Scenario::from_toml_str("").unwrap();
        assert_eq!(s, Scenario::default());
        assert_eq!(s.rsu_count(), 16);
        let w = s.initial_state().unwrap();
        assert_eq!(w.nodes.len(), 17);
        assert_eq!(w.nodes[16].kind, NodeKind::Uav);
        assert_eq!(w.nodes[5].pos, Position::ground(500.0, 500.0));
        assert_eq!(w.vehicle.pos, Position::ground(250.0, 250.0));
        assert_eq!(w.serving, NodeId(0));
    }

    #[test]
    fn round_trips_through_toml() {
        for s in [Scenario::default(), Scenario::toy()] {
            let text = s.to_toml_string().unwrap();
            assert_eq!(Scenario::from_toml_str(&text).unwrap(), s);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = Scenario::from_toml_str("[grid]\nrowz = 3\n").unwrap_err().to_string();
        assert!(err.contains("rowz"), "{err}");
        assert!(Scenario::from_toml_str("[background]\nhotspot_nodes = [99]\n").is_err());
    }

    #[test]
    fn overrides_apply_per_node() {
        let s = Scenario::from_toml_str("[[rsu.overrides]]\nindex = 3\ncompute = 4e10\ninitial_workload = 1.5e10\n")
            .unwrap();
        let w = s.initial_state().unwrap();
        assert_eq!(w.nodes[3].compute, 4e10);
        assert_eq!(w.nodes[3].workload, 1.5e10);
        assert_eq!(w.nodes[2].compute, 6e10);
        let swept = s.with_rsu_compute(8e10).initial_state().unwrap();
        assert!(swept.rsus().all(|n| n.compute == 8e10));
    }

    #[test]
    fn default_action_space_size() {
        // 15 non-serving RSUs plus the UAV when it is within reach of RSU 0.
        let env = Scenario::default().build_env().unwrap();
        assert_eq!(env.action_count(), 1 + 17 * 9);
        assert_eq!(env.action_space().len(), 1 + 16 * 9);
        let obs = env.observe();
        assert_eq!(obs.len(), env.obs_dim());
    }

    #[test]
    fn toy_is_served_by_the_hot_node() {
        let s = Scenario::toy();
        let w = s.initial_state().unwrap();
        assert_eq!(w.serving, NodeId(0));
        assert_eq!(w.nodes.len(), 2);
        assert_eq!(s.world_config().background.hotspot, vec![0.8, 0.0]);
    }
}
