//! Continuous-control environments with a reward-noise knob.

mod pendulum;

pub use pendulum::{wrap_angle, Pendulum, PendulumParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::TransitionLayout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
    /// Standard deviation of the zero-mean Gaussian noise added to every reward.
    pub reward_noise: f64,
    pub gamma: f64,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.action_low.len() != self.action_high.len() || self.action_low.is_empty() {
            return Err(Error::Config("action box bounds must be non-empty and equal length".into()));
        }
        if self.action_low.iter().zip(&self.action_high).any(|(l, h)| l.partial_cmp(h) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::Config("action box needs low < high in every dimension".into()));
        }
        if !(self.reward_noise.is_finite() && self.reward_noise >= 0.0) {
            return Err(Error::Config(format!("reward noise must be >= 0, got {}", self.reward_noise)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if self.max_episode_steps == 0 {
            return Err(Error::Config("max episode length must be positive".into()));
        }
        Ok(())
    }

    pub fn action_dim(&self) -> usize {
        self.action_low.len()
    }

    pub fn layout(&self) -> TransitionLayout {
        TransitionLayout {
            obs_dim: self.obs_dim,
            action_low: self.action_low.clone(),
            action_high: self.action_high.clone(),
        }
    }

    pub fn clip_action(&self, action: &mut [f64]) {
        for (j, a) in action.iter_mut().enumerate() {
            *a = a.clamp(self.action_low[j], self.action_high[j]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    /// Base reward plus reward noise.
    pub reward: f64,
    pub base_reward: f64,
    /// The episode is over (time limit or absorbing state).
    pub terminal: bool,
    /// The next state is absorbing; bootstrapping past it is invalid.
    pub absorbing: bool,
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    /// Start a new episode; `Some(seed)` reseeds the environment's generator first.
    fn reset(&mut self, seed: Option<u64>) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;

    fn observation(&self) -> Vec<f64>;

    /// Put the environment in the physical state that produces `observation`.
    fn restore(&mut self, observation: &[f64]) -> Result<()>;

    /// Noise-free dynamics step that ignores episode bookkeeping; returns the base reward.
    fn advance(&mut self, action: &[f64]) -> Result<f64>;
}
