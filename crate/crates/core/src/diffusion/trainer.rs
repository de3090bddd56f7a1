use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nn::{soft_update, Adam, Mlp};
use super::objective::{critic_target, min_q, policy_objective, policy_objective_grad};
use super::policy::{chain_backward, masked_softmax, run_chain, run_chain_taped, ChainNoise, DenoiserParams};
use super::replay::{ReplayBuffer, Transition};
use super::schedule::{make_schedule, NoiseSchedule};
use super::DiffusionError;
use crate::env::Environment;
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount_gamma: f64,
    /// Entropy temperature.
    pub entropy_temp: f64,
    pub soft_update_tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub diffusion_steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Hidden widths shared by the denoiser and the critics.
    pub hidden: Vec<usize>,
    pub time_embed_dim: usize,
    pub episodes: usize,
    /// Transitions collected before the first update; `batch_size` when unset.
    pub warmup: Option<usize>,
    pub updates_per_step: usize,
    /// Truncates episodes longer than this.
    pub max_episode_steps: Option<usize>,
    /// Samples per gradient chunk; fixes the float reduction order.
    pub grad_chunk: usize,
}

impl Default for TrainerConfig {
    /// Desk-scale settings: a 5-step chain with a steeper noise schedule.
    fn default() -> Self {
        Self {
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            discount_gamma: 0.95,
            entropy_temp: 0.05,
            soft_update_tau: 0.005,
            batch_size: 64,
            buffer_capacity: 100_000,
            diffusion_steps: 5,
            beta_min: 0.05,
            beta_max: 0.5,
            hidden: vec![256, 256],
            time_embed_dim: 16,
            episodes: 300,
            warmup: None,
            updates_per_step: 1,
            max_episode_steps: None,
            grad_chunk: 16,
        }
    }
}

impl TrainerConfig {
    /// The published setup: learning rates 1e-4, replay 1e6, batch 512,
    /// 100 diffusion steps on the linear 1e-4..0.02 schedule.
    pub fn published() -> Self {
        Self {
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            batch_size: 512,
            buffer_capacity: 1_000_000,
            diffusion_steps: 100,
            beta_min: 1e-4,
            beta_max: 0.02,
            ..Self::default()
        }
    }

    pub fn warmup(&self) -> usize {
        self.warmup.unwrap_or(self.batch_size)
    }

    pub fn schedule(&self) -> Result<NoiseSchedule, DiffusionError> {
        make_schedule(self.diffusion_steps, self.beta_min, self.beta_max)
    }

    pub fn validate(&self) -> Result<(), DiffusionError> {
        let bad = |m: String| Err(DiffusionError::Config(m));
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be > 0".into());
        }
        if !(self.discount_gamma > 0.0 && self.discount_gamma < 1.0) {
            return bad(format!("discount_gamma {} outside (0, 1)", self.discount_gamma));
        }
        if !(self.entropy_temp >= 0.0 && self.entropy_temp.is_finite()) {
            return bad(format!("entropy_temp {} must be >= 0", self.entropy_temp));
        }
        if !(self.soft_update_tau > 0.0 && self.soft_update_tau <= 1.0) {
            return bad(format!("soft_update_tau {} outside (0, 1]", self.soft_update_tau));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.grad_chunk == 0 || self.time_embed_dim == 0 {
            return bad("batch_size, buffer_capacity, grad_chunk and time_embed_dim must be >= 1".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden widths must be nonempty and positive".into());
        }
        self.schedule().map(|_| ())
    }
}

/// Online and target critics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticParams {
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
}

/// Everything needed to act and to keep training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub schedule: NoiseSchedule,
    pub actor: DenoiserParams,
    pub actor_target: DenoiserParams,
    pub critics: CriticParams,
}

impl Agent {
    pub fn new(obs_dim: usize, actions: usize, cfg: &TrainerConfig, seed: u64) -> Result<Self, DiffusionError> {
        cfg.validate()?;
        if obs_dim == 0 || actions == 0 {
            return Err(DiffusionError::Config("observation and action sizes must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = DenoiserParams::new(actions, obs_dim, &cfg.hidden, cfg.time_embed_dim, &mut rng);
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(actions);
        let q1 = Mlp::new(&sizes, &mut rng);
        let q2 = Mlp::new(&sizes, &mut rng);
        Ok(Self {
            schedule: cfg.schedule()?,
            actor_target: actor.clone(),
            actor,
            critics: CriticParams { q1_target: q1.clone(), q2_target: q2.clone(), q1, q2 },
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.obs_dim
    }

    pub fn actions(&self) -> usize {
        self.actor.actions
    }

    pub fn is_finite(&self) -> bool {
        [
            self.actor.net.params(),
            self.actor_target.net.params(),
            self.critics.q1.params(),
            self.critics.q2.params(),
            self.critics.q1_target.params(),
            self.critics.q2_target.params(),
        ]
        .iter()
        .all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Structural consistency, as required when loading from disk.
    pub fn validate(&self) -> Result<(), DiffusionError> {
        let (k, s) = (self.actions(), self.obs_dim());
        let a = &self.actor;
        if a.net.input_dim() != k + a.time_dim + s
            || a.net.output_dim() != k
            || !a.net.same_shape(&self.actor_target.net)
        {
            return Err(DiffusionError::Checkpoint("actor shape mismatch".into()));
        }
        let c = &self.critics;
        for q in [&c.q1, &c.q2, &c.q1_target, &c.q2_target] {
            if q.input_dim() != s || q.output_dim() != k || !q.same_shape(&c.q1) {
                return Err(DiffusionError::Checkpoint("critic shape mismatch".into()));
            }
        }
        if !self.schedule.is_valid() {
            return Err(DiffusionError::Checkpoint("invalid noise schedule".into()));
        }
        if !self.is_finite() {
            return Err(DiffusionError::Checkpoint("non-finite parameters".into()));
        }
        Ok(())
    }

    /// One draw of the masked action distribution.
    pub fn policy<R: Rng + ?Sized>(&self, obs: &[f64], mask: &[bool], rng: &mut R) -> Vec<f64> {
        let noise = ChainNoise::sample(self.actions(), self.schedule.steps, rng);
        masked_softmax(&run_chain(obs, &self.actor, &self.schedule, &noise), mask)
    }

    /// Samples an action, or takes the most probable one when `greedy`.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], mask: &[bool], rng: &mut R, greedy: bool) -> usize {
        let p = self.policy(obs, mask, rng);
        if greedy {
            argmax(&p)
        } else {
            sample_index(&p, rng.random())
        }
    }

    pub fn q_values(&self, obs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.critics.q1.forward(obs), self.critics.q2.forward(obs))
    }

    /// Batch-mean policy objective with fixed chain noise, its mean entropy,
    /// and its gradient with respect to the actor parameters.
    pub fn policy_objective_grad(
        &self,
        obs: &[&[f64]],
        masks: &[&[bool]],
        noise: &[ChainNoise],
        temp: f64,
        exec: Execution,
        chunk: usize,
    ) -> (f64, f64, Vec<f64>) {
        let n = obs.len();
        let order: Vec<usize> = (0..n).collect();
        let scale = 1.0 / n as f64;
        let parts = par::map_chunks(exec, &order, chunk, |ids| {
            let mut g = vec![0.0; self.actor.net.param_count()];
            let (mut obj, mut ent) = (0.0, 0.0);
            for &i in ids {
                let (x0, tape) = run_chain_taped(obs[i], &self.actor, &self.schedule, &noise[i]);
                let pi = masked_softmax(&x0, masks[i]);
                let (q1, q2) = self.q_values(obs[i]);
                let m = min_q(&q1, &q2);
                let terms = policy_objective(&pi, &m, temp);
                obj += terms.value;
                ent += terms.entropy;
                let gx: Vec<f64> = policy_objective_grad(&pi, &m, temp).iter().map(|v| v * scale).collect();
                chain_backward(&self.actor, &self.schedule, &tape, &gx, &mut g);
            }
            (obj, ent, g)
        });
        let mut grad = vec![0.0; self.actor.net.param_count()];
        let (mut obj, mut ent) = (0.0, 0.0);
        for (o, e, g) in parts {
            obj += o;
            ent += e;
            add_into(&mut grad, &g);
        }
        (obj * scale, ent * scale, grad)
    }

    /// Batch-mean policy objective with fixed chain noise.
    pub fn policy_objective(&self, obs: &[&[f64]], masks: &[&[bool]], noise: &[ChainNoise], temp: f64) -> f64 {
        let total: f64 = (0..obs.len())
            .map(|i| {
                let pi = masked_softmax(&run_chain(obs[i], &self.actor, &self.schedule, &noise[i]), masks[i]);
                let (q1, q2) = self.q_values(obs[i]);
                policy_objective(&pi, &min_q(&q1, &q2), temp).value
            })
            .sum();
        total / obs.len() as f64
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from `p` using `u` in `[0, 1)`; never returns a
/// zero-probability index.
fn sample_index(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = argmax(p);
    for (i, &v) in p.iter().enumerate() {
        if v > 0.0 {
            acc += v;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

/// Decorrelated child seed (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_objective: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub steps: usize,
    pub total_return: f64,
    pub mean_latency: f64,
    /// Means over the updates made during the episode; zero when `updates == 0`.
    pub critic_loss: f64,
    pub actor_objective: f64,
    pub entropy: f64,
    pub updates: usize,
}

/// Agent plus optimizer state and replay memory.
#[derive(Debug, Clone)]
pub struct Learner {
    pub agent: Agent,
    pub cfg: TrainerConfig,
    pub buffer: ReplayBuffer,
    actor_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
    rng: ChaCha8Rng,
    updates: u64,
    exec: Execution,
}

impl Learner {
    pub fn new(obs_dim: usize, actions: usize, cfg: &TrainerConfig, seed: u64) -> Result<Self, DiffusionError> {
        let agent = Agent::new(obs_dim, actions, cfg, seed)?;
        Ok(Self {
            actor_opt: Adam::new(agent.actor.net.param_count(), cfg.actor_lr),
            q1_opt: Adam::new(agent.critics.q1.param_count(), cfg.critic_lr),
            q2_opt: Adam::new(agent.critics.q2.param_count(), cfg.critic_lr),
            buffer: ReplayBuffer::new(cfg.buffer_capacity)?,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX)),
            agent,
            cfg: cfg.clone(),
            updates: 0,
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// One critic step, one actor step and the target updates.
    pub fn update(&mut self) -> Result<UpdateStats, DiffusionError> {
        if self.buffer.is_empty() {
            return Err(DiffusionError::EmptyBatch);
        }
        let idx = self.buffer.sample_indices(self.cfg.batch_size, &mut self.rng);
        let b = idx.len();
        let k = self.agent.actions();
        let steps = self.agent.schedule.steps;
        let next_noise: Vec<ChainNoise> = (0..b).map(|_| ChainNoise::sample(k, steps, &mut self.rng)).collect();
        let actor_noise: Vec<ChainNoise> = (0..b).map(|_| ChainNoise::sample(k, steps, &mut self.rng)).collect();
        let batch: Vec<&Transition> = idx.iter().map(|&i| self.buffer.get(i).expect("sampled index")).collect();
        let (exec, chunk) = (self.exec, self.cfg.grad_chunk);
        let gamma = self.cfg.discount_gamma;
        let agent = &self.agent;

        let ys: Vec<f64> = par::map_range(exec, b, |i| {
            let t = batch[i];
            if t.done {
                return t.reward;
            }
            let x0 = run_chain(&t.next_obs, &agent.actor_target, &agent.schedule, &next_noise[i]);
            let pi = masked_softmax(&x0, &t.next_mask);
            let q1 = agent.critics.q1_target.forward(&t.next_obs);
            let q2 = agent.critics.q2_target.forward(&t.next_obs);
            critic_target(t.reward, false, gamma, &pi, &q1, &q2)
        });

        let order: Vec<usize> = (0..b).collect();
        let scale = 1.0 / b as f64;
        let parts = par::map_chunks(exec, &order, chunk, |ids| {
            let c = &agent.critics;
            let mut g1 = vec![0.0; c.q1.param_count()];
            let mut g2 = vec![0.0; c.q2.param_count()];
            let (mut l1, mut l2) = (0.0, 0.0);
            for &i in ids {
                let t = batch[i];
                for (net, g, l) in [(&c.q1, &mut g1, &mut l1), (&c.q2, &mut g2, &mut l2)] {
                    let (q, cache) = net.forward_cached(&t.obs);
                    let r = q[t.action] - ys[i];
                    *l += r * r;
                    let mut go = vec![0.0; k];
                    go[t.action] = 2.0 * r * scale;
                    net.backward(&cache, &go, g);
                }
            }
            (g1, g2, l1, l2)
        });
        let mut g1 = vec![0.0; agent.critics.q1.param_count()];
        let mut g2 = vec![0.0; agent.critics.q2.param_count()];
        let (mut l1, mut l2) = (0.0, 0.0);
        for (a, c, x, y) in parts {
            add_into(&mut g1, &a);
            add_into(&mut g2, &c);
            l1 += x;
            l2 += y;
        }
        let critic_loss = 0.5 * (l1 + l2) * scale;
        self.guard(critic_loss, "critic loss")?;
        self.guard(g1.iter().chain(&g2).sum(), "critic gradient")?;
        self.q1_opt.step(self.agent.critics.q1.params_mut(), &g1);
        self.q2_opt.step(self.agent.critics.q2.params_mut(), &g2);

        let obs: Vec<&[f64]> = batch.iter().map(|t| t.obs.as_slice()).collect();
        let masks: Vec<&[bool]> = batch.iter().map(|t| t.mask.as_slice()).collect();
        let (objective, entropy, grad) =
            self.agent.policy_objective_grad(&obs, &masks, &actor_noise, self.cfg.entropy_temp, exec, chunk);
        self.guard(objective, "actor objective")?;
        self.guard(grad.iter().sum(), "actor gradient")?;
        let ascent: Vec<f64> = grad.iter().map(|g| -g).collect();
        self.actor_opt.step(self.agent.actor.net.params_mut(), &ascent);

        let tau = self.cfg.soft_update_tau;
        let a = &mut self.agent;
        soft_update(a.critics.q1_target.params_mut(), a.critics.q1.params(), tau)?;
        soft_update(a.critics.q2_target.params_mut(), a.critics.q2.params(), tau)?;
        soft_update(a.actor_target.net.params_mut(), a.actor.net.params(), tau)?;
        self.updates += 1;
        Ok(UpdateStats { critic_loss, actor_objective: objective, entropy })
    }

    fn guard(&self, v: f64, what: &str) -> Result<(), DiffusionError> {
        if v.is_finite() {
            Ok(())
        } else {
            Err(DiffusionError::Diverged { update: self.updates, what: format!("{what} is {v}") })
        }
    }

    /// Stores a transition and runs the scheduled updates.
    pub fn observe(&mut self, t: Transition) -> Result<Vec<UpdateStats>, DiffusionError> {
        self.buffer.push(t)?;
        let mut out = Vec::new();
        if self.buffer.len() >= self.cfg.warmup().max(1) {
            for _ in 0..self.cfg.updates_per_step {
                out.push(self.update()?);
            }
        }
        Ok(out)
    }

    /// Collects one exploratory episode, learning as it goes.
    pub fn run_episode<E: Environment + ?Sized>(
        &mut self,
        env: &mut E,
        episode: usize,
        seed: u64,
    ) -> Result<EpisodeLog, DiffusionError> {
        let mut obs = env.reset(seed)?;
        let mut mask = env.action_mask();
        let mut log = EpisodeLog {
            episode,
            steps: 0,
            total_return: 0.0,
            mean_latency: 0.0,
            critic_loss: 0.0,
            actor_objective: 0.0,
            entropy: 0.0,
            updates: 0,
        };
        loop {
            let action = self.agent.act(&obs, &mask, &mut self.rng, false);
            let step = env.step(action)?;
            let next_mask = env.action_mask();
            log.steps += 1;
            log.total_return += step.reward;
            log.mean_latency += step.latency;
            let stats = self.observe(Transition {
                obs,
                mask,
                action,
                reward: step.reward,
                next_obs: step.obs.clone(),
                next_mask: next_mask.clone(),
                done: step.done,
            })?;
            for s in &stats {
                log.critic_loss += s.critic_loss;
                log.actor_objective += s.actor_objective;
                log.entropy += s.entropy;
            }
            log.updates += stats.len();
            let capped = self.cfg.max_episode_steps.is_some_and(|m| log.steps >= m);
            if step.done || step.truncated || capped {
                break;
            }
            obs = step.obs;
            mask = next_mask;
        }
        log.mean_latency /= log.steps as f64;
        if log.updates > 0 {
            let n = log.updates as f64;
            log.critic_loss /= n;
            log.actor_objective /= n;
            log.entropy /= n;
        }
        Ok(log)
    }
}

/// Trains a fresh agent on `env` for `cfg.episodes` episodes.
pub fn train<E: Environment + ?Sized>(
    env: &mut E,
    cfg: &TrainerConfig,
    seed: u64,
) -> Result<(Agent, Vec<EpisodeLog>), DiffusionError> {
    let mut learner = Learner::new(env.obs_dim(), env.action_count(), cfg, seed)?;
    let mut logs = Vec::with_capacity(cfg.episodes);
    for e in 0..cfg.episodes {
        logs.push(learner.run_episode(env, e, derive_seed(seed, e as u64))?);
    }
    Ok((learner.agent, logs))
}
