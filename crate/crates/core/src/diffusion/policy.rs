use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::nn::{Mlp, MlpCache};
use super::schedule::NoiseSchedule;

/// Noise predictor `eps(x_t, t, s)`: an MLP over the concatenation of the
/// noisy logits, a sinusoidal embedding of `t`, and the observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserParams {
    pub net: Mlp,
    pub actions: usize,
    pub obs_dim: usize,
    pub time_dim: usize,
}

impl DenoiserParams {
    pub fn new<R: Rng + ?Sized>(
        actions: usize,
        obs_dim: usize,
        hidden: &[usize],
        time_dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut sizes = vec![actions + time_dim + obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(actions);
        Self { net: Mlp::new(&sizes, rng), actions, obs_dim, time_dim }
    }

    fn input(&self, x: &[f64], t: usize, obs: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.net.input_dim());
        v.extend_from_slice(x);
        v.extend(time_embedding(t, self.time_dim));
        v.extend_from_slice(obs);
        v
    }

    pub fn eps(&self, x: &[f64], t: usize, obs: &[f64]) -> Vec<f64> {
        self.net.forward(&self.input(x, t, obs))
    }
}

/// `[sin(t w_0), cos(t w_0), sin(t w_1), ...]` with `w_j = 10000^(-j / (dim/2))`.
pub fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim.div_ceil(2).max(1) as f64;
    (0..dim)
        .map(|i| {
            let j = (i / 2) as f64;
            let w = (-(10000f64).ln() * j / half).exp();
            let a = t as f64 * w;
            if i % 2 == 0 {
                a.sin()
            } else {
                a.cos()
            }
        })
        .collect()
}

fn eps_scale(sched: &NoiseSchedule, t: usize) -> f64 {
    sched.beta(t) / (1.0 - sched.alpha_bar(t)).sqrt()
}

/// `(x_t - beta_t tanh(eps) / sqrt(1 - abar_t)) / sqrt(alpha_t)`.
pub fn reverse_mean_from_eps(x: &[f64], eps: &[f64], t: usize, sched: &NoiseSchedule) -> Vec<f64> {
    let c = eps_scale(sched, t);
    let inv = 1.0 / sched.alpha(t).sqrt();
    x.iter().zip(eps).map(|(x, e)| (x - c * e.tanh()) * inv).collect()
}

pub fn reverse_mean(x: &[f64], t: usize, obs: &[f64], params: &DenoiserParams, sched: &NoiseSchedule) -> Vec<f64> {
    reverse_mean_from_eps(x, &params.eps(x, t, obs), t, sched)
}

/// Gaussian draws for one reverse chain: the starting point `x_N` and one
/// vector per step `t = 2..=N` (the final step is noiseless).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainNoise {
    pub x_n: Vec<f64>,
    /// `z[t - 2]` is used on the step from `x_t` to `x_{t-1}`.
    pub z: Vec<Vec<f64>>,
}

impl ChainNoise {
    pub fn sample<R: Rng + ?Sized>(dim: usize, steps: usize, rng: &mut R) -> Self {
        let mut draw = || (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<f64>>();
        let x_n = draw();
        let z = (0..steps.saturating_sub(1)).map(|_| draw()).collect();
        Self { x_n, z }
    }

    fn z(&self, t: usize) -> Option<&[f64]> {
        if t <= 1 {
            None
        } else {
            Some(&self.z[t - 2])
        }
    }
}

/// Runs the reverse chain from `noise.x_n` down to `x_0`.
pub fn run_chain(obs: &[f64], params: &DenoiserParams, sched: &NoiseSchedule, noise: &ChainNoise) -> Vec<f64> {
    let mut x = noise.x_n.clone();
    for t in (1..=sched.steps).rev() {
        let mut next = reverse_mean(&x, t, obs, params, sched);
        if let Some(z) = noise.z(t) {
            let s = sched.posterior_std(t);
            for (n, z) in next.iter_mut().zip(z) {
                *n += s * z;
            }
        }
        x = next;
    }
    x
}

/// Activations of every chain step, for [`chain_backward`].
#[derive(Debug, Clone)]
pub struct ChainTape {
    /// `(cache, tanh(eps))` for `t = N..=1` in that order.
    steps: Vec<(MlpCache, Vec<f64>)>,
}

pub fn run_chain_taped(
    obs: &[f64],
    params: &DenoiserParams,
    sched: &NoiseSchedule,
    noise: &ChainNoise,
) -> (Vec<f64>, ChainTape) {
    let mut x = noise.x_n.clone();
    let mut steps = Vec::with_capacity(sched.steps);
    for t in (1..=sched.steps).rev() {
        let (eps, cache) = params.net.forward_cached(&params.input(&x, t, obs));
        let th: Vec<f64> = eps.iter().map(|e| e.tanh()).collect();
        let c = eps_scale(sched, t);
        let inv = 1.0 / sched.alpha(t).sqrt();
        let s = sched.posterior_std(t);
        let z = noise.z(t);
        x = x
            .iter()
            .zip(&th)
            .enumerate()
            .map(|(i, (x, th))| (x - c * th) * inv + z.map_or(0.0, |z| s * z[i]))
            .collect();
        steps.push((cache, th));
    }
    (x, ChainTape { steps })
}

/// Accumulates `d loss / d theta` into `grad` given `d loss / d x_0`, with
/// the recorded noise held fixed.
pub fn chain_backward(
    params: &DenoiserParams,
    sched: &NoiseSchedule,
    tape: &ChainTape,
    grad_x0: &[f64],
    grad: &mut [f64],
) {
    let k = params.actions;
    let mut g = grad_x0.to_vec();
    for (idx, (cache, th)) in tape.steps.iter().enumerate().rev() {
        let t = idx_to_t(sched.steps, idx);
        let c = eps_scale(sched, t);
        let inv = 1.0 / sched.alpha(t).sqrt();
        let g_eps: Vec<f64> = g.iter().zip(th).map(|(g, th)| -g * c * inv * (1.0 - th * th)).collect();
        let g_in = params.net.backward(cache, &g_eps, grad);
        for i in 0..k {
            g[i] = g[i] * inv + g_in[i];
        }
    }
}

fn idx_to_t(steps: usize, idx: usize) -> usize {
    steps - idx
}

/// Draws fresh noise and returns `x_0`.
pub fn sample_action_logits<R: Rng + ?Sized>(
    obs: &[f64],
    params: &DenoiserParams,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Vec<f64> {
    let noise = ChainNoise::sample(params.actions, sched.steps, rng);
    run_chain(obs, params, sched, &noise)
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Softmax restricted to `mask`; masked entries get exactly zero.
pub fn masked_softmax(x: &[f64], mask: &[bool]) -> Vec<f64> {
    assert_eq!(x.len(), mask.len(), "mask length");
    assert!(mask.iter().any(|&m| m), "at least one action must be valid");
    let m = x.iter().zip(mask).filter(|(_, &ok)| ok).map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().zip(mask).map(|(v, &ok)| if ok { (v - m).exp() } else { 0.0 }).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

pub fn action_distribution<R: Rng + ?Sized>(
    obs: &[f64],
    params: &DenoiserParams,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Vec<f64> {
    softmax(&sample_action_logits(obs, params, sched, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::make_schedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_params(actions: usize, obs: usize) -> DenoiserParams {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = DenoiserParams::new(actions, obs, &[8], 4, &mut rng);
        p.net.params_mut().fill(0.0);
        p
    }

    #[test]
    fn reverse_mean_examples() {
        let s = make_schedule(3, 0.1, 0.3).unwrap();
        let x = [0.4, -2.0, 1.0];
        let mu = reverse_mean(&x, 2, &[0.0], &zero_params(3, 1), &s);
        for (m, x) in mu.iter().zip(x) {
            assert_eq!(*m, x / s.alpha(2).sqrt());
        }
        let sat = reverse_mean_from_eps(&[1.0], &[1e6], 2, &s);
        let bound = (1.0 - s.beta(2) / (1.0 - s.alpha_bar(2)).sqrt()) / s.alpha(2).sqrt();
        assert!((sat[0] - bound).abs() < 1e-12);
    }

    #[test]
    fn reverse_mean_reference_value() {
        // alpha_t = 0.81, beta_t = 0.19, abar_t = 0.5: a two-step schedule with
        // beta = [1 - 0.5/0.81, 0.19] has exactly that second step.
        let b1 = 1.0 - 0.5 / 0.81;
        let s = NoiseSchedule {
            steps: 2,
            beta: vec![b1, 0.19],
            alpha: vec![1.0 - b1, 0.81],
            alpha_bar: vec![1.0 - b1, 0.5],
        };
        let mu = reverse_mean_from_eps(&[1.0], &[0.5], 2, &s);
        // Python: (1 - 0.19*tanh(0.5)/sqrt(0.5)) / 0.9
        assert!((mu[0] - 0.973_143_170_301_714_2).abs() < 1e-12, "{}", mu[0]);
    }

    #[test]
    fn single_step_chain_rescales_draw() {
        let s = make_schedule(1, 0.2, 0.2).unwrap();
        let p = zero_params(2, 1);
        let noise = ChainNoise::sample(2, 1, &mut ChaCha8Rng::seed_from_u64(9));
        let x0 = run_chain(&[0.5], &p, &s, &noise);
        for (a, b) in x0.iter().zip(&noise.x_n) {
            assert_eq!(*a, b / s.alpha(1).sqrt());
        }
    }

    #[test]
    fn sampling_is_deterministic_per_rng_state() {
        let s = make_schedule(5, 0.05, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = DenoiserParams::new(3, 2, &[16, 16], 4, &mut rng);
        let a = sample_action_logits(&[0.1, 0.2], &p, &s, &mut ChaCha8Rng::seed_from_u64(5));
        let b = sample_action_logits(&[0.1, 0.2], &p, &s, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn zero_denoiser_chain_has_zero_mean() {
        let s = make_schedule(5, 0.05, 0.5).unwrap();
        let p = zero_params(3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 10_000;
        let samples: Vec<Vec<f64>> = (0..n).map(|_| sample_action_logits(&[0.0], &p, &s, &mut rng)).collect();
        for k in 0..3 {
            let mean = samples.iter().map(|x| x[k]).sum::<f64>() / n as f64;
            let var = samples.iter().map(|x| (x[k] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!(mean.abs() < 4.0 * se, "coordinate {k}: mean {mean}, se {se}");
        }
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[3f64.ln(), 0.0]);
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
        let p = softmax(&[1.0, 2.0, 3.0]);
        let expected = [0.090_030_573_170_380_46, 0.244_728_471_054_797_67, 0.665_240_955_774_821_9];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = masked_softmax(&[5.0, 0.0, 0.0], &[false, true, true]);
        assert_eq!(p, vec![0.0, 0.5, 0.5]);
    }

    #[test]
    fn entropy_bounds() {
        assert!((entropy(&[0.25; 4]) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn chain_gradient_matches_finite_differences() {
        let s = make_schedule(4, 0.05, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = DenoiserParams::new(3, 2, &[6, 5], 4, &mut rng);
        let noise = ChainNoise::sample(3, 4, &mut rng);
        let obs = [0.3, -0.7];
        let w = [0.5, -1.0, 2.0];
        let loss = |p: &DenoiserParams| run_chain(&obs, p, &s, &noise).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let (x0, tape) = run_chain_taped(&obs, &p, &s, &noise);
        assert_eq!(x0, run_chain(&obs, &p, &s, &noise));
        let mut grad = vec![0.0; p.net.param_count()];
        chain_backward(&p, &s, &tape, &w, &mut grad);
        let h = 1e-6;
        for i in (0..grad.len()).step_by(7) {
            let mut a = p.clone();
            a.net.params_mut()[i] += h;
            let mut b = p.clone();
            b.net.params_mut()[i] -= h;
            let fd = (loss(&a) - loss(&b)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", grad[i]);
        }
    }
}
