use serde::{Deserialize, Serialize};

use super::DiffusionError;

/// Per-step forward-noise variances and their complements.
///
/// Vectors are indexed by `t - 1` for diffusion step `t` in `1..=steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub steps: usize,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_bar: Vec<f64>,
}

/// Linear `beta` from `beta_min` to `beta_max`; `alpha_bar` is the running product.
pub fn make_schedule(steps: usize, beta_min: f64, beta_max: f64) -> Result<NoiseSchedule, DiffusionError> {
    if steps == 0 {
        return Err(DiffusionError::Config("diffusion steps must be >= 1".into()));
    }
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
        return Err(DiffusionError::Config(format!("need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]")));
    }
    let beta: Vec<f64> = if steps == 1 {
        vec![beta_min]
    } else {
        (0..steps).map(|i| beta_min + (beta_max - beta_min) * i as f64 / (steps - 1) as f64).collect()
    };
    let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bar = Vec::with_capacity(steps);
    let mut acc = 1.0;
    for a in &alpha {
        acc *= a;
        alpha_bar.push(acc);
    }
    Ok(NoiseSchedule { steps, beta, alpha, alpha_bar })
}

impl NoiseSchedule {
    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t - 1]
    }

    /// `alpha_bar` at `t - 1`, with `alpha_bar_0 = 1`.
    pub fn alpha_bar_prev(&self, t: usize) -> f64 {
        if t <= 1 {
            1.0
        } else {
            self.alpha_bar[t - 2]
        }
    }

    /// Reverse-step standard deviation `sqrt(beta_t (1 - abar_{t-1}) / (1 - abar_t))`.
    /// Zero at `t = 1`.
    pub fn posterior_std(&self, t: usize) -> f64 {
        (self.beta(t) * (1.0 - self.alpha_bar_prev(t)) / (1.0 - self.alpha_bar(t))).sqrt()
    }

    pub fn is_valid(&self) -> bool {
        self.beta.len() == self.steps
            && self.beta.iter().all(|b| *b > 0.0 && *b < 1.0)
            && self.alpha_bar.windows(2).all(|w| w[1] < w[0])
    }
}

/// One forward noising step `sqrt(1 - beta_t) x + sqrt(beta_t) noise`.
pub fn forward_noising(x_prev: &[f64], t: usize, sched: &NoiseSchedule, noise: &[f64]) -> Vec<f64> {
    assert_eq!(x_prev.len(), noise.len(), "dimension mismatch");
    let b = sched.beta(t);
    forward_noising_beta(x_prev, b, noise)
}

pub(crate) fn forward_noising_beta(x_prev: &[f64], beta: f64, noise: &[f64]) -> Vec<f64> {
    let keep = (1.0 - beta).sqrt();
    let add = beta.sqrt();
    x_prev.iter().zip(noise).map(|(x, n)| keep * x + add * n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let s = make_schedule(1, 0.5, 0.5).unwrap();
        assert_eq!(s.alpha_bar, vec![0.5]);

        let s = make_schedule(3, 0.1, 0.1).unwrap();
        let expected = [0.9, 0.81, 0.729];
        for (a, e) in s.alpha_bar.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }

        // Python: numpy.prod(1 - numpy.linspace(1e-4, 0.02, 100)) = 0.363563...
        let s = make_schedule(100, 1e-4, 0.02).unwrap();
        assert!((s.alpha_bar(100) - 0.363_563_248_055_492_2).abs() < 1e-12, "{}", s.alpha_bar(100));
        assert!(s.alpha_bar(100) < 0.37);
        assert!(s.is_valid());
    }

    #[test]
    fn schedule_rejects_bad_ranges() {
        assert!(make_schedule(0, 0.1, 0.2).is_err());
        assert!(make_schedule(5, 0.0, 0.2).is_err());
        assert!(make_schedule(5, 0.3, 0.2).is_err());
        assert!(make_schedule(5, 0.1, 1.0).is_err());
    }

    #[test]
    fn posterior_std_vanishes_at_first_step() {
        let s = make_schedule(5, 0.05, 0.5).unwrap();
        assert_eq!(s.posterior_std(1), 0.0);
        assert!(s.posterior_std(3) > 0.0);
    }

    #[test]
    fn forward_noising_examples() {
        assert_eq!(forward_noising_beta(&[1.5, -2.0], 0.0, &[7.0, 7.0]), vec![1.5, -2.0]);
        let z = forward_noising_beta(&[0.0, 0.0], 0.25, &[2.0, -4.0]);
        assert_eq!(z, vec![1.0, -2.0]);
        let x = forward_noising_beta(&[1.0, 2.0], 0.19, &[1.0, -1.0]);
        assert!((x[0] - 1.335_889_894_354_067_4).abs() < 1e-12, "{x:?}");
        assert!((x[1] - 1.364_110_105_645_932_7).abs() < 1e-12, "{x:?}");
    }
}
