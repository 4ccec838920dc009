//! Fixed-capacity ring buffer of transitions with uniform sampling.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CAPACITY: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True only for absorbing terminal states; time-limit truncations are stored as `false`.
    pub terminal: bool,
}

/// Shape constraints every stored transition must satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionLayout {
    pub obs_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

impl TransitionLayout {
    pub fn action_dim(&self) -> usize {
        self.action_low.len()
    }

    pub fn validate(&self, t: &Transition) -> Result<()> {
        if t.state.len() != self.obs_dim || t.next_state.len() != self.obs_dim {
            return Err(Error::InvalidTransition(format!(
                "state widths {} / {} but observation width is {}",
                t.state.len(),
                t.next_state.len(),
                self.obs_dim
            )));
        }
        if t.action.len() != self.action_dim() {
            return Err(Error::InvalidTransition(format!(
                "action width {} but expected {}",
                t.action.len(),
                self.action_dim()
            )));
        }
        let finite = t.state.iter().chain(&t.next_state).chain(&t.action).all(|v| v.is_finite());
        if !finite || !t.reward.is_finite() {
            return Err(Error::InvalidTransition("non-finite entry".into()));
        }
        for (j, a) in t.action.iter().enumerate() {
            if *a < self.action_low[j] || *a > self.action_high[j] {
                return Err(Error::InvalidTransition(format!(
                    "action {a} outside [{}, {}]",
                    self.action_low[j], self.action_high[j]
                )));
            }
        }
        Ok(())
    }
}

/// A sampled mini-batch, one transition per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    /// 0 where the next state is absorbing, 1 where bootstrapping continues.
    pub not_done: Array1<f64>,
}

impl Batch {
    pub fn from_transitions<'a, I>(items: I, obs_dim: usize, action_dim: usize) -> Self
    where
        I: ExactSizeIterator<Item = &'a Transition>,
    {
        let k = items.len();
        let mut states = Array2::zeros((k, obs_dim));
        let mut actions = Array2::zeros((k, action_dim));
        let mut next_states = Array2::zeros((k, obs_dim));
        let mut rewards = Array1::zeros(k);
        let mut not_done = Array1::zeros(k);
        for (i, t) in items.enumerate() {
            states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.state));
            actions.row_mut(i).assign(&ndarray::ArrayView1::from(&t.action));
            next_states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.next_state));
            rewards[i] = t.reward;
            not_done[i] = if t.terminal { 0.0 } else { 1.0 };
        }
        Self { states, actions, rewards, next_states, not_done }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    layout: TransitionLayout,
    capacity: usize,
    storage: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, layout: TransitionLayout) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            layout,
            capacity,
            storage: Vec::new(),
            cursor: 0,
        })
    }

    pub fn layout(&self) -> &TransitionLayout {
        &self.layout
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Index the next push will write to.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        self.layout.validate(&t)?;
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_chronological(&self) -> impl Iterator<Item = &Transition> + '_ {
        let split = if self.storage.len() < self.capacity { 0 } else { self.cursor };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }

    /// The `age`-th most recent transition (`age = 0` is the newest).
    fn recent(&self, age: usize) -> &Transition {
        let n = self.storage.len();
        let newest = (self.cursor + self.capacity - 1) % self.capacity;
        let idx = if n < self.capacity { n - 1 - age } else { (newest + self.capacity - age) % self.capacity };
        &self.storage[idx]
    }

    /// `k` independent uniform draws with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.storage.is_empty() {
            return Err(Error::ReplayTooSmall { have: 0, need: 1 });
        }
        let n = self.storage.len();
        Ok((0..k).map(|_| rng.random_range(0..n)).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Batch> {
        let idx = self.sample_indices(k, rng)?;
        Ok(Batch::from_transitions(
            idx.iter().map(|&i| &self.storage[i]),
            self.layout.obs_dim,
            self.layout.action_dim(),
        ))
    }

    /// `k` distinct transitions drawn uniformly from the newest `window` entries.
    pub fn sample_recent_distinct<R: Rng + ?Sized>(
        &self,
        k: usize,
        window: usize,
        rng: &mut R,
    ) -> Result<Vec<&Transition>> {
        let pool = window.min(self.storage.len());
        if pool < k || k == 0 {
            return Err(Error::ReplayTooSmall { have: pool, need: k.max(1) });
        }
        let ages = rand::seq::index::sample(rng, pool, k);
        Ok(ages.iter().map(|age| self.recent(age)).collect())
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.storage.get(index)
    }
}
