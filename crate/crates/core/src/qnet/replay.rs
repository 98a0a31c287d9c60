use std::collections::VecDeque;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One complete game, as the agent saw it through its memory.
///
/// Observation `t` is the rendered memory before action `t`; observation
/// `t + 1` is the rendered memory after it, so a game of `T` steps stores
/// `T + 1` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    input_size: usize,
    observations: Vec<f32>,
    actions: Vec<u8>,
    rewards: Vec<f32>,
    dones: Vec<bool>,
}

/// Borrowed view of a single stored transition.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub observation: &'a [f32],
    pub action: usize,
    pub reward: f32,
    pub next_observation: &'a [f32],
    pub done: bool,
}

impl Trajectory {
    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn observation(&self, t: usize) -> &[f32] {
        &self.observations[t * self.input_size..(t + 1) * self.input_size]
    }

    pub fn transition(&self, t: usize) -> Transition<'_> {
        Transition {
            observation: self.observation(t),
            action: self.actions[t] as usize,
            reward: self.rewards[t],
            next_observation: self.observation(t + 1),
            done: self.dones[t],
        }
    }

    pub fn total_reward(&self) -> f32 {
        self.rewards.iter().sum()
    }

    /// Content digest, for checking that stored games are never modified.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.input_size as u64).to_le_bytes());
        for v in &self.observations {
            h.update(v.to_le_bytes());
        }
        h.update(&self.actions);
        for r in &self.rewards {
            h.update(r.to_le_bytes());
        }
        h.update(self.dones.iter().map(|d| *d as u8).collect::<Vec<_>>());
        h.finalize().into()
    }
}

/// Accumulates a game as it is played.
#[derive(Debug, Clone)]
pub struct TrajectoryBuilder {
    inner: Trajectory,
}

impl TrajectoryBuilder {
    pub fn new(initial_observation: &[f32]) -> Self {
        Self {
            inner: Trajectory {
                input_size: initial_observation.len(),
                observations: initial_observation.to_vec(),
                actions: Vec::new(),
                rewards: Vec::new(),
                dones: Vec::new(),
            },
        }
    }

    pub fn push(&mut self, action: usize, reward: f32, next_observation: &[f32], done: bool) -> Result<()> {
        if next_observation.len() != self.inner.input_size {
            return Err(Error::LengthMismatch {
                expected: self.inner.input_size,
                actual: next_observation.len(),
            });
        }
        self.inner.observations.extend_from_slice(next_observation);
        self.inner.actions.push(action as u8);
        self.inner.rewards.push(reward);
        self.inner.dones.push(done);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn finish(self) -> Trajectory {
        self.inner
    }
}

/// Ring of the most recent complete games.
#[derive(Debug, Clone)]
pub struct ReplayStore {
    capacity: usize,
    games: VecDeque<Arc<Trajectory>>,
}

impl ReplayStore {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be at least 1 game".into()));
        }
        Ok(Self {
            capacity,
            games: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.games.len()
    }

    pub fn is_empty(&self) -> bool {
        self.games.is_empty()
    }

    pub fn push(&mut self, game: Trajectory) {
        if self.games.len() == self.capacity {
            self.games.pop_front();
        }
        self.games.push_back(Arc::new(game));
    }

    pub fn get(&self, index: usize) -> &Trajectory {
        &self.games[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Trajectory> {
        self.games.iter().map(|g| g.as_ref())
    }
}
