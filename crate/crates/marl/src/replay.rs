//! Off-policy transition storage.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One stored step of the joint MDP.
///
/// Observations and the flattened global state are snapshots of the joint
/// state at t and t+1. For the recurrent agent the rollout-time hidden
/// states are stored alongside, and previous actions reconstruct the
/// observation-history input.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Per-agent observations at t, row-major (n_agents x OBS_DIM).
    pub obs: Vec<f64>,
    /// Per-agent observations at t+1.
    pub next_obs: Vec<f64>,
    /// Flattened global state at t.
    pub global: Vec<f64>,
    /// Flattened global state at t+1.
    pub next_global: Vec<f64>,
    /// Chosen action level per agent at t.
    pub actions: Vec<u16>,
    /// Action level per agent at t-1 (recurrent input reconstruction).
    pub prev_actions: Vec<u16>,
    pub reward: f64,
    pub done: bool,
    /// Active (occupied) agents at t.
    pub mask: Vec<bool>,
    /// Active agents at t+1.
    pub next_mask: Vec<bool>,
    /// Rollout hidden state per agent at t (empty for feed-forward agents).
    pub hidden: Vec<f64>,
    /// Rollout hidden state per agent at t+1.
    pub next_hidden: Vec<f64>,
}

/// Bounded FIFO replay buffer.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    ring: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            ring: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    /// Appends a transition, evicting the oldest when full.
    pub fn push(&mut self, transition: Transition) {
        if self.ring.len() == self.capacity {
            self.ring.pop_front();
        }
        self.ring.push_back(transition);
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.ring[index]
    }

    /// Uniform sample of `batch_size` distinct indices.
    pub fn sample_indices(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        debug_assert!(batch_size <= self.ring.len());
        // Floyd's algorithm keeps the draw O(batch) without replacement.
        let n = self.ring.len();
        let mut chosen: Vec<usize> = Vec::with_capacity(batch_size);
        for j in (n - batch_size)..n {
            let t = rng.gen_range(0..=j);
            if chosen.contains(&t) {
                chosen.push(j);
            } else {
                chosen.push(t);
            }
        }
        chosen
    }
}
