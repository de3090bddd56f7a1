//! Migration policies driven through [`VtMigrationEnv`]: the trained agent
//! and the comparison baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vtwin_core::diffusion::Agent;
use vtwin_core::env::{EnvError, Environment, MigrationAction, VtMigrationEnv};

pub trait MigrationPolicy {
    fn name(&self) -> &str;
    /// Global action index; must be valid in the current state.
    fn choose(&mut self, env: &VtMigrationEnv, obs: &[f64]) -> Result<usize, EnvError>;
}

/// Uniform over the currently valid actions.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl MigrationPolicy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn choose(&mut self, env: &VtMigrationEnv, _: &[f64]) -> Result<usize, EnvError> {
        let valid: Vec<usize> = env.action_mask().iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
        Ok(valid[self.rng.random_range(0..valid.len())])
    }
}

/// Never pre-migrates.
pub struct NoMigrationPolicy;

impl MigrationPolicy for NoMigrationPolicy {
    fn name(&self) -> &str {
        "no-migration"
    }

    fn choose(&mut self, _: &VtMigrationEnv, _: &[f64]) -> Result<usize, EnvError> {
        Ok(0)
    }
}

/// Exhaustive one-step latency minimization.
pub struct MyopicPolicy;

impl MigrationPolicy for MyopicPolicy {
    fn name(&self) -> &str {
        "myopic"
    }

    fn choose(&mut self, env: &VtMigrationEnv, _: &[f64]) -> Result<usize, EnvError> {
        Ok(env.best_action()?.0)
    }
}

/// Pre-migrates to the eligible node nearest the vehicle, with whichever
/// ratio (zero included) gives that node the lowest one-step latency.
pub struct GreedyNearestPolicy;

impl MigrationPolicy for GreedyNearestPolicy {
    fn name(&self) -> &str {
        "greedy-nearest"
    }

    fn choose(&mut self, env: &VtMigrationEnv, _: &[f64]) -> Result<usize, EnvError> {
        let state = env.state();
        let veh = state.vehicle.pos;
        let space = env.action_space();
        let nearest = space
            .iter()
            .filter(|a| a.alpha_bin > 0)
            .filter_map(|a| state.node(a.target).map(|n| (n.pos.distance_to(&veh), a.target)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id);
        let Some(target) = nearest else {
            return Ok(0);
        };
        let mut best = (0usize, env.no_migration_latency()?.total);
        for a in space.iter().filter(|a| a.target == target && a.alpha_bin > 0) {
            let t = env.evaluate(a)?.latency.total;
            if t < best.1 {
                best = (env.action_index(a).expect("valid action"), t);
            }
        }
        Ok(best.0)
    }
}

/// A trained diffusion agent; greedy by default.
pub struct AgentPolicy {
    agent: Agent,
    rng: ChaCha8Rng,
    greedy: bool,
}

impl AgentPolicy {
    pub fn new(agent: Agent, seed: u64, greedy: bool) -> Self {
        Self { agent, rng: ChaCha8Rng::seed_from_u64(seed), greedy }
    }
}

impl MigrationPolicy for AgentPolicy {
    fn name(&self) -> &str {
        "agent"
    }

    fn choose(&mut self, env: &VtMigrationEnv, obs: &[f64]) -> Result<usize, EnvError> {
        Ok(self.agent.act(obs, &env.action_mask(), &mut self.rng, self.greedy))
    }
}

/// Outcome of one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub total_return: f64,
    pub mean_latency: f64,
    pub steps: usize,
    /// Per-slot latencies in seconds.
    pub latencies: Vec<f64>,
    /// Joules spent by all UAVs; zero when assistance is off.
    pub uav_energy: f64,
    pub uav_energy_identity: bool,
    pub actions: Vec<usize>,
}

/// Rolls out one full episode of `policy` from `env.reset(seed)`.
pub fn run_episode(
    env: &mut VtMigrationEnv,
    policy: &mut dyn MigrationPolicy,
    seed: u64,
) -> Result<EpisodeResult, EnvError> {
    let mut obs = env.reset(seed)?;
    let mut res = EpisodeResult {
        total_return: 0.0,
        mean_latency: 0.0,
        steps: 0,
        latencies: Vec::new(),
        uav_energy: 0.0,
        uav_energy_identity: true,
        actions: Vec::new(),
    };
    loop {
        let a = policy.choose(env, &obs)?;
        let step = env.step(a)?;
        res.actions.push(a);
        res.total_return += step.reward;
        res.latencies.push(step.latency);
        res.steps += 1;
        obs = step.obs;
        if step.done || step.truncated {
            break;
        }
    }
    res.mean_latency = res.latencies.iter().sum::<f64>() / res.steps as f64;
    for agent in env.uav_agents() {
        let spent = vtwin_core::durp::mission_energy_mj(&agent.trace);
        res.uav_energy += vtwin_core::durp::mission_energy(&agent.trace);
        res.uav_energy_identity &= agent.initial_battery_mj() - agent.energy.battery_mj() == spent;
    }
    Ok(res)
}

/// The action a baseline would take, decoded; handy for tests and traces.
pub fn describe(env: &VtMigrationEnv, index: usize) -> Option<MigrationAction> {
    env.decode(index)
}
