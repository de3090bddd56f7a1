//! Diffusion-policy actor, double critics and the off-policy trainer.

mod checkpoint;
mod nn;
mod objective;
mod policy;
mod replay;
mod schedule;
mod trainer;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use nn::{soft_update, Adam, Mlp, MlpCache};
pub use objective::{
    critic_loss, critic_target, expected_min_q, min_q, policy_objective, policy_objective_grad, PolicyTerms,
};
pub use policy::{
    action_distribution, chain_backward, entropy, masked_softmax, reverse_mean, reverse_mean_from_eps, run_chain,
    run_chain_taped, sample_action_logits, softmax, time_embedding, ChainNoise, ChainTape, DenoiserParams,
};
pub use replay::{ReplayBuffer, Transition};
pub use schedule::{forward_noising, make_schedule, NoiseSchedule};
pub use trainer::{derive_seed, train, Agent, CriticParams, EpisodeLog, Learner, TrainerConfig, UpdateStats};

use thiserror::Error;

use crate::env::EnvError;

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged at update {update}: {what}")]
    Diverged { update: u64, what: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
