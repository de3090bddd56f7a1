//! World model: geometry, wireless downlink, workloads, vehicle mobility and
//! the per-slot latency of a split vehicle-twin task.

mod channel;
mod geometry;
mod latency;
mod node;
mod world;

pub use channel::{channel_gain, downlink_rate, ChannelParams, MIN_CHANNEL_DISTANCE};
pub use geometry::{distance, Position};
pub use latency::{downlink_latency, migration_latency, processing_latency, total_latency, LatencyBreakdown, TaskSpec};
pub use node::{EdgeNode, NodeId, NodeKind, VehicleState};
pub use world::{background_arrivals, select_serving, step_world, BackgroundParams, Route, WorldConfig, WorldState};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("downlink from node {0} has zero rate")]
    NoLink(NodeId),
    #[error("node {0} cannot be both serving and pre-migration target with a nonzero split")]
    InvalidSplit(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("time horizon of {0} slots exceeded")]
    HorizonExceeded(usize),
}
