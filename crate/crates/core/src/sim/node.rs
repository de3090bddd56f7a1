use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ChannelParams, Position, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Rsu,
    Uav,
}

/// An edge server: a roadside unit or an aerial (UAV) server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub pos: Position,
    /// GPU cycles per second.
    pub compute: f64,
    /// Pending GPU cycles.
    pub workload: f64,
    /// Workload capacity in GPU cycles.
    pub workload_max: f64,
    /// Backhaul bandwidth to other edge nodes, bits/s.
    pub inter_node_bandwidth: f64,
    pub channel: ChannelParams,
}

impl EdgeNode {
    pub fn is_rsu(&self) -> bool {
        self.kind == NodeKind::Rsu
    }

    pub fn normalized_workload(&self) -> f64 {
        self.workload / self.workload_max
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |what: &str| Err(SimError::InvalidParameter(format!("node {}: {what}", self.id)));
        if !self.pos.is_finite() {
            return bad("position must be finite");
        }
        if !(self.workload >= 0.0 && self.workload.is_finite()) {
            return bad("workload must be >= 0");
        }
        if !(self.compute > 0.0 && self.compute.is_finite()) {
            return bad("compute must be > 0");
        }
        if !(self.workload_max > 0.0 && self.workload_max.is_finite()) {
            return bad("workload_max must be > 0");
        }
        if !(self.inter_node_bandwidth > 0.0 && self.inter_node_bandwidth.is_finite()) {
            return bad("inter_node_bandwidth must be > 0");
        }
        self.channel.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub pos: Position,
    /// Ground-plane velocity in m/s.
    pub velocity: [f64; 2],
    /// Transmit power in watts.
    pub transmit_power: f64,
    /// GPU cycles needed per bit of task data.
    pub cycles_per_bit: f64,
}

impl VehicleState {
    pub fn speed(&self) -> f64 {
        self.velocity[0].hypot(self.velocity[1])
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.transmit_power > 0.0 && self.transmit_power.is_finite()) {
            return Err(SimError::InvalidParameter("vehicle transmit_power must be > 0".into()));
        }
        if !(self.cycles_per_bit > 0.0 && self.cycles_per_bit.is_finite()) {
            return Err(SimError::InvalidParameter("vehicle cycles_per_bit must be > 0".into()));
        }
        if !self.pos.is_finite() {
            return Err(SimError::InvalidParameter("vehicle position must be finite".into()));
        }
        Ok(())
    }
}
