//! Experiment control for vtwin: configuration, baseline policies, seeded
//! runs and metric emission.

pub mod config;
pub mod metrics;
pub mod policies;
pub mod runs;

use thiserror::Error;
use vtwin_core::diffusion::DiffusionError;
use vtwin_core::durp::DurpError;
use vtwin_core::env::EnvError;
use vtwin_core::scenario::ScenarioError;
use vtwin_core::sim::SimError;

pub use config::{load_config, parse_config, ExperimentConfig, RunMode, ENV_PREFIX};
pub use metrics::{MetricsRecord, RunSummary};
pub use runs::{run, run_baseline, run_eval, run_route_study, run_sweep, run_training};

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("routing: {0}")]
    Durp(#[from] DurpError),
    #[error("{context}: {source}")]
    Diffusion {
        context: String,
        #[source]
        source: DiffusionError,
    },
}

impl ExpError {
    pub fn diffusion(context: impl Into<String>, source: DiffusionError) -> Self {
        ExpError::Diffusion { context: context.into(), source }
    }
}
