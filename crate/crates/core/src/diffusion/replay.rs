use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DiffusionError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// Valid actions in `obs`.
    pub mask: Vec<bool>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub next_mask: Vec<bool>,
    /// Terminal; no bootstrap from `next_obs`.
    pub done: bool,
}

/// Bounded FIFO replay memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self, DiffusionError> {
        if capacity == 0 {
            return Err(DiffusionError::Config("replay capacity must be >= 1".into()));
        }
        Ok(Self { capacity, items: VecDeque::new() })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) -> Result<(), DiffusionError> {
        if !t.reward.is_finite() {
            return Err(DiffusionError::Config(format!("non-finite reward {}", t.reward)));
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        Ok(())
    }

    /// Uniform indices without replacement; `min(batch, len)` of them.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        rand::seq::index::sample(rng, self.items.len(), batch.min(self.items.len())).into_vec()
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&Transition> {
        self.sample_indices(batch, rng).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(r: f64) -> Transition {
        Transition {
            obs: vec![r],
            mask: vec![true],
            action: 0,
            reward: r,
            next_obs: vec![r],
            next_mask: vec![true],
            done: false,
        }
    }

    #[test]
    fn evicts_oldest() {
        let mut b = ReplayBuffer::new(3).unwrap();
        for i in 0..5 {
            b.push(tr(i as f64)).unwrap();
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.get(0).unwrap().reward, 2.0);
        assert!(ReplayBuffer::new(0).is_err());
        assert!(b.push(tr(f64::NAN)).is_err());
    }

    #[test]
    fn samples_without_replacement() {
        let mut b = ReplayBuffer::new(100).unwrap();
        for i in 0..50 {
            b.push(tr(i as f64)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut idx = b.sample_indices(50, &mut rng);
        idx.sort();
        assert_eq!(idx, (0..50).collect::<Vec<_>>());
        assert_eq!(b.sample(80, &mut rng).len(), 50);
    }
}
