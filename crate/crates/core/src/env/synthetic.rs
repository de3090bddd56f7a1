//! Tiny environments with known optimal behavior, for exercising learners.

use super::{EnvError, Environment, StepResult};

/// One state, one action, constant reward; never terminal, truncated after
/// `horizon` steps. The optimal value is `reward / (1 - gamma)`.
#[derive(Debug, Clone)]
pub struct ConstantRewardEnv {
    reward: f64,
    horizon: usize,
    t: usize,
}

impl ConstantRewardEnv {
    pub fn new(reward: f64, horizon: usize) -> Self {
        Self { reward, horizon, t: 0 }
    }
}

impl Environment for ConstantRewardEnv {
    fn obs_dim(&self) -> usize {
        1
    }

    fn action_count(&self) -> usize {
        1
    }

    fn reset(&mut self, _seed: u64) -> Result<Vec<f64>, EnvError> {
        self.t = 0;
        Ok(vec![1.0])
    }

    fn action_mask(&self) -> Vec<bool> {
        vec![true]
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if action != 0 {
            return Err(EnvError::InvalidAction { index: action, count: 1 });
        }
        self.t += 1;
        Ok(StepResult {
            obs: vec![1.0],
            reward: self.reward,
            done: false,
            truncated: self.t >= self.horizon,
            latency: 0.0,
        })
    }
}

/// Two arms in a fixed context: arm 0 pays 1, arm 1 pays 0. Episodes last
/// `horizon` pulls.
#[derive(Debug, Clone)]
pub struct TwoArmBandit {
    horizon: usize,
    t: usize,
}

impl TwoArmBandit {
    pub fn new(horizon: usize) -> Self {
        Self { horizon, t: 0 }
    }
}

impl Environment for TwoArmBandit {
    fn obs_dim(&self) -> usize {
        1
    }

    fn action_count(&self) -> usize {
        2
    }

    fn reset(&mut self, _seed: u64) -> Result<Vec<f64>, EnvError> {
        self.t = 0;
        Ok(vec![1.0])
    }

    fn action_mask(&self) -> Vec<bool> {
        vec![true, true]
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if action > 1 {
            return Err(EnvError::InvalidAction { index: action, count: 2 });
        }
        self.t += 1;
        Ok(StepResult {
            obs: vec![1.0],
            reward: if action == 0 { 1.0 } else { 0.0 },
            done: self.t >= self.horizon,
            truncated: false,
            latency: 0.0,
        })
    }
}
