use super::policy::entropy;
use super::DiffusionError;

pub fn min_q(q1: &[f64], q2: &[f64]) -> Vec<f64> {
    q1.iter().zip(q2).map(|(a, b)| a.min(*b)).collect()
}

/// `sum_a pi[a] min(q1[a], q2[a])`.
pub fn expected_min_q(pi: &[f64], q1: &[f64], q2: &[f64]) -> f64 {
    pi.iter().zip(q1.iter().zip(q2)).map(|(p, (a, b))| if *p > 0.0 { p * a.min(*b) } else { 0.0 }).sum()
}

/// Bellman target with the expectation of the clipped double-Q value under
/// the target policy; the bootstrap is dropped on terminal transitions.
pub fn critic_target(reward: f64, done: bool, gamma: f64, pi_next: &[f64], q1_next: &[f64], q2_next: &[f64]) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * expected_min_q(pi_next, q1_next, q2_next)
    }
}

/// Mean squared error between `Q(s, a)` and its target.
pub fn critic_loss(q_sa: &[f64], targets: &[f64]) -> Result<f64, DiffusionError> {
    if q_sa.is_empty() {
        return Err(DiffusionError::EmptyBatch);
    }
    if q_sa.len() != targets.len() {
        return Err(DiffusionError::ShapeMismatch { expected: q_sa.len(), found: targets.len() });
    }
    Ok(q_sa.iter().zip(targets).map(|(q, y)| (q - y).powi(2)).sum::<f64>() / q_sa.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyTerms {
    pub value: f64,
    pub expected_q: f64,
    pub entropy: f64,
}

/// `sum_a pi[a] minq[a] + temp H(pi)` for one state.
pub fn policy_objective(pi: &[f64], minq: &[f64], temp: f64) -> PolicyTerms {
    let expected_q = pi.iter().zip(minq).map(|(p, q)| if *p > 0.0 { p * q } else { 0.0 }).sum();
    let h = entropy(pi);
    PolicyTerms { value: expected_q + temp * h, expected_q, entropy: h }
}

/// Gradient of [`policy_objective`] with respect to the logits, where
/// `pi = softmax(logits)` over the entries with `pi > 0`.
pub fn policy_objective_grad(pi: &[f64], minq: &[f64], temp: f64) -> Vec<f64> {
    let g: Vec<f64> =
        pi.iter().zip(minq).map(|(p, q)| if *p > 0.0 { q - temp * (p.ln() + 1.0) } else { 0.0 }).collect();
    let mean: f64 = pi.iter().zip(&g).map(|(p, g)| p * g).sum();
    pi.iter().zip(&g).map(|(p, g)| p * (g - mean)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::softmax;

    #[test]
    fn critic_target_examples() {
        assert!((critic_target(1.0, false, 0.9, &[1.0], &[2.0], &[5.0]) - 2.8).abs() < 1e-15);
        assert_eq!(critic_target(-0.5, true, 0.9, &[1.0], &[2.0], &[5.0]), -0.5);
        let y = critic_target(0.0, false, 0.9, &[0.5, 0.5], &[1.0, 3.0], &[2.0, 2.0]);
        assert!((y - 0.9 * 1.5).abs() < 1e-15);
    }

    #[test]
    fn critic_loss_examples() {
        assert_eq!(critic_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(critic_loss(&[1.0], &[3.0]).unwrap(), 4.0);
        assert_eq!(critic_loss(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 2.5);
        assert!(matches!(critic_loss(&[], &[]), Err(DiffusionError::EmptyBatch)));
    }

    #[test]
    fn policy_objective_examples() {
        let t = policy_objective(&[0.25; 4], &[1.5; 4], 0.2);
        assert!((t.value - (1.5 + 0.2 * 4f64.ln())).abs() < 1e-12);
        let t = policy_objective(&[0.0, 1.0, 0.0], &[1.0, 4.0, 2.0], 0.0);
        assert_eq!(t.value, 4.0);
        // Python: 0.75 + 0.1 * -(0.75*log(0.75) + 0.25*log(0.25))
        let t = policy_objective(&[0.75, 0.25], &[1.0, 0.0], 0.1);
        assert!((t.value - 0.806_233_514_461_880_9).abs() < 1e-12, "{}", t.value);
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let x = [0.3, -1.1, 0.9, 0.2];
        let q = [1.0, -0.5, 0.3, 2.0];
        let f = |x: &[f64]| policy_objective(&softmax(x), &q, 0.3).value;
        let g = policy_objective_grad(&softmax(&x), &q, 0.3);
        for i in 0..4 {
            let mut a = x;
            a[i] += 1e-6;
            let mut b = x;
            b[i] -= 1e-6;
            let fd = (f(&a) - f(&b)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
        }
    }
}
