use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EnvSpec, Environment, StepOutcome};
use crate::error::{Error, Result};

pub const GRAVITY: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const DT: f64 = 0.05;
pub const MAX_SPEED: f64 = 8.0;
pub const MAX_TORQUE: f64 = 2.0;

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = x - two_pi * ((x - PI) / two_pi).ceil();
    if w <= -PI {
        w + two_pi
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub reward_noise: f64,
    pub max_episode_steps: usize,
    pub gamma: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            reward_noise: 0.0,
            max_episode_steps: 200,
            gamma: 0.99,
        }
    }
}

/// Torque-controlled inverted pendulum; observation `(cos angle, sin angle, angular velocity)`.
#[derive(Debug, Clone)]
pub struct Pendulum {
    spec: EnvSpec,
    angle: f64,
    velocity: f64,
    steps: usize,
    rng: ChaCha8Rng,
}

impl Pendulum {
    pub fn new(params: PendulumParams, seed: u64) -> Result<Self> {
        let spec = EnvSpec {
            obs_dim: 3,
            action_low: vec![-MAX_TORQUE],
            action_high: vec![MAX_TORQUE],
            max_episode_steps: params.max_episode_steps,
            reward_noise: params.reward_noise,
            gamma: params.gamma,
        };
        spec.validate()?;
        Ok(Self {
            spec,
            angle: 0.0,
            velocity: 0.0,
            steps: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn set_state(&mut self, angle: f64, velocity: f64) -> Result<()> {
        if !(angle.is_finite() && velocity.is_finite()) {
            return Err(Error::NonFinite("pendulum state".into()));
        }
        self.angle = wrap_angle(angle);
        self.velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
        Ok(())
    }

    fn torque(&self, action: &[f64]) -> Result<f64> {
        if action.len() != 1 {
            return Err(Error::shape(format!("pendulum takes one torque, got {}", action.len())));
        }
        if !action[0].is_finite() {
            return Err(Error::NonFinite("action".into()));
        }
        Ok(action[0].clamp(-MAX_TORQUE, MAX_TORQUE))
    }

    fn integrate(&mut self, u: f64) -> f64 {
        let cost = self.angle.powi(2) + 0.1 * self.velocity.powi(2) + 0.001 * u * u;
        let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * self.angle.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
        self.velocity = (self.velocity + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.angle = wrap_angle(self.angle + self.velocity * DT);
        -cost
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: Option<u64>) -> Vec<f64> {
        if let Some(seed) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        // random() is in [0, 1), so the angle lands in (-pi, pi]
        self.angle = PI - 2.0 * PI * self.rng.random::<f64>();
        self.velocity = self.rng.random_range(-1.0..=1.0);
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let u = self.torque(action)?;
        let base_reward = self.integrate(u);
        let noise: f64 = self.rng.sample(StandardNormal);
        self.steps += 1;
        Ok(StepOutcome {
            observation: self.observation(),
            reward: base_reward + self.spec.reward_noise * noise,
            base_reward,
            terminal: self.steps >= self.spec.max_episode_steps,
            absorbing: false,
        })
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.angle.cos(), self.angle.sin(), self.velocity]
    }

    fn restore(&mut self, observation: &[f64]) -> Result<()> {
        if observation.len() != 3 {
            return Err(Error::shape(format!("pendulum observation has 3 entries, got {}", observation.len())));
        }
        self.set_state(observation[1].atan2(observation[0]), observation[2])
    }

    fn advance(&mut self, action: &[f64]) -> Result<f64> {
        let u = self.torque(action)?;
        Ok(self.integrate(u))
    }
}
