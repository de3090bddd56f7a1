//! Dynamic UAV routing: A* over the RSU waypoint graph toward the currently
//! most loaded RSU, with energy bookkeeping and workload absorption.

mod astar;
mod energy;
mod graph;
mod planner;

pub use astar::{astar_search, astar_with, HeuristicContext, HeuristicWeights, RoutePlan};
pub use energy::{mission_energy, mission_energy_mj, EnergyModel, EnergyParams, TraceEntry, TraceKind};
pub use graph::RoutingGraph;
pub use planner::{
    absorb_workload, select_goal, AssistParams, DurpPlanner, GreedyHotspotMover, RandomWalkMover, StaticHoverMover,
    UavAgent, UavMover, UavStep,
};

use thiserror::Error;

use crate::sim::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum DurpError {
    #[error("no path from vertex {start} to vertex {goal}")]
    NoPath { start: usize, goal: usize },
    #[error("vertex {0} is not in the routing graph")]
    UnknownVertex(usize),
    #[error("node {0} has no routing vertex")]
    UnknownNode(NodeId),
    #[error("no RSU available for goal selection")]
    NoRsu,
    #[error("edge weight must be finite and >= 0, got {0}")]
    NegativeWeight(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
