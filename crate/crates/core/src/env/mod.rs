//! Episodic decision process over the edge-network world.
//!
//! The agent picks, every slot, a pre-migration target and a quantized ratio
//! `alpha`. Actions use a fixed global index space so a policy network has a
//! constant output width; per-state validity is reported as a mask.

mod migration;
pub mod synthetic;

pub use migration::{
    compute_reward, ActionOutcome, EnvSpec, FleetSpec, MdpSettings, MigrationAction, TaskParams, VtMigrationEnv,
};

use thiserror::Error;

use crate::durp::DurpError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Durp(#[from] DurpError),
    #[error("action {index} is not valid in this state ({count} actions)")]
    InvalidAction { index: usize, count: usize },
    #[error("configuration error: {0}")]
    Config(String),
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// Terminal: the horizon was reached and no bootstrap should follow.
    pub done: bool,
    /// Episode cut short without a terminal state.
    pub truncated: bool,
    /// Total service latency of the slot in seconds (0 for synthetic tasks).
    pub latency: f64,
}

/// The episodic interface consumed by the trainer and the experiment runner.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn action_count(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>, EnvError>;
    /// `mask[i]` is true when global action `i` is valid now.
    fn action_mask(&self) -> Vec<bool>;
    fn step(&mut self, action: usize) -> Result<StepResult, EnvError>;
}
