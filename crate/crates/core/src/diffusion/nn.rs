//! Fully connected network with Mish hidden activations, hand-written
//! backprop, and Adam.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Parameters are stored flat: for each layer, the row-major `out x in`
/// weight matrix followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Vec<f64>>,
}

fn mish(x: f64) -> f64 {
    x * softplus(x).tanh()
}

fn mish_grad(x: f64) -> f64 {
    let sp = softplus(x);
    let t = sp.tanh();
    let sigmoid = 1.0 / (1.0 + (-x).exp());
    t + x * (1.0 - t * t) * sigmoid
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

impl Mlp {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let mut params = Vec::with_capacity(Self::count(sizes));
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] + w[1] {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Self { sizes: sizes.to_vec(), params }
    }

    fn count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let start = offset;
            offset += w[0] * w[1] + w[1];
            (start, w[0], w[1])
        })
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.input_dim());
        let n_layers = self.sizes.len() - 1;
        let mut x = input.to_vec();
        for (l, (off, fan_in, fan_out)) in self.layers().enumerate() {
            let mut y = affine(&self.params[off..], &x, fan_in, fan_out);
            if l + 1 < n_layers {
                y.iter_mut().for_each(|v| *v = mish(*v));
            }
            x = y;
        }
        x
    }

    pub fn forward_cached(&self, input: &[f64]) -> (Vec<f64>, MlpCache) {
        debug_assert_eq!(input.len(), self.input_dim());
        let n_layers = self.sizes.len() - 1;
        let mut cache = MlpCache { inputs: Vec::with_capacity(n_layers), pre: Vec::with_capacity(n_layers) };
        let mut x = input.to_vec();
        for (l, (off, fan_in, fan_out)) in self.layers().enumerate() {
            let y = affine(&self.params[off..], &x, fan_in, fan_out);
            cache.inputs.push(x);
            if l + 1 < n_layers {
                x = y.iter().map(|v| mish(*v)).collect();
                cache.pre.push(y);
            } else {
                x = y;
            }
        }
        (x, cache)
    }

    /// Accumulates `d out / d params` into `grad` and returns `d out / d input`.
    pub fn backward(&self, cache: &MlpCache, grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grad.len(), self.params.len());
        let layers: Vec<_> = self.layers().collect();
        let mut g = grad_out.to_vec();
        for l in (0..layers.len()).rev() {
            let (off, fan_in, fan_out) = layers[l];
            if l + 1 < layers.len() {
                for (gi, pre) in g.iter_mut().zip(&cache.pre[l]) {
                    *gi *= mish_grad(*pre);
                }
            }
            let x = &cache.inputs[l];
            let w = &self.params[off..off + fan_in * fan_out];
            let (gw, gb) = grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            let mut gx = vec![0.0; fan_in];
            for o in 0..fan_out {
                let go = g[o];
                gb[o] += go;
                if go == 0.0 {
                    continue;
                }
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let grow = &mut gw[o * fan_in..(o + 1) * fan_in];
                for i in 0..fan_in {
                    grow[i] += go * x[i];
                    gx[i] += go * row[i];
                }
            }
            g = gx;
        }
        g
    }
}

fn affine(params: &[f64], x: &[f64], fan_in: usize, fan_out: usize) -> Vec<f64> {
    let (w, rest) = params.split_at(fan_in * fan_out);
    let b = &rest[..fan_out];
    (0..fan_out).map(|o| b[o] + dot(&w[o * fan_in..(o + 1) * fan_in], x)).collect()
}

/// Dot product with four interleaved partial sums; the fixed summation order
/// keeps results reproducible while letting the compiler vectorize.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `target <- (1 - tau) target + tau online`, elementwise.
pub fn soft_update(target: &mut [f64], online: &[f64], tau: f64) -> Result<(), super::DiffusionError> {
    if target.len() != online.len() {
        return Err(super::DiffusionError::ShapeMismatch { expected: target.len(), found: online.len() });
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(super::DiffusionError::Config(format!("soft update tau {tau} outside (0, 1]")));
    }
    if tau == 1.0 {
        target.copy_from_slice(online);
        return Ok(());
    }
    for (t, o) in target.iter_mut().zip(online) {
        *t = (1.0 - tau) * *t + tau * o;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Descends along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t = self.t.saturating_add(1);
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::new(&[3, 5, 4, 2], &mut rng);
        let x = [0.3, -1.2, 0.8];
        let w = [0.7, -1.3];
        let loss = |net: &Mlp, x: &[f64]| net.forward(x).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let (out, cache) = net.forward_cached(&x);
        assert_eq!(out, net.forward(&x));
        let mut grad = vec![0.0; net.param_count()];
        let gx = net.backward(&cache, &w, &mut grad);
        let h = 1e-6;
        for (i, &g) in grad.iter().enumerate() {
            let p = net.params()[i];
            net.params_mut()[i] = p + h;
            let up = loss(&net, &x);
            net.params_mut()[i] = p - h;
            let down = loss(&net, &x);
            net.params_mut()[i] = p;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g).abs() < 1e-7, "param {i}: {fd} vs {g}");
        }
        for i in 0..3 {
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let fd = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn soft_update_examples() {
        let mut t = vec![0.0, 5.0];
        soft_update(&mut t, &[1.0, 2.0], 1.0).unwrap();
        assert_eq!(t, vec![1.0, 2.0]);

        let mut t = vec![0.0];
        soft_update(&mut t, &[1.0], 0.005).unwrap();
        assert_eq!(t, vec![0.005]);

        let mut t = vec![0.0];
        soft_update(&mut t, &[1.0], 0.5).unwrap();
        soft_update(&mut t, &[1.0], 0.5).unwrap();
        assert_eq!(t, vec![0.75]);

        assert!(soft_update(&mut t, &[1.0, 2.0], 0.5).is_err());
        assert!(soft_update(&mut t, &[1.0], 0.0).is_err());
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = vec![3.0, -2.0];
        let mut opt = Adam::new(2, 0.1);
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut p, &g);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-2), "{p:?}");
    }
}
