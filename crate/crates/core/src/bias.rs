//! Estimation bias: critic estimates against Monte Carlo returns of the current policy.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, StepView};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::nn::Network;

pub const DEFAULT_HORIZON: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasSettings {
    /// State-action pairs per measurement.
    pub n: usize,
    /// Environment steps between measurements.
    pub cadence: u64,
    /// Rollout length of the discounted return.
    pub horizon: usize,
    /// Pairs are drawn from this many most recent replay entries.
    pub window: usize,
}

impl Default for BiasSettings {
    fn default() -> Self {
        Self {
            n: 256,
            cadence: 5000,
            horizon: DEFAULT_HORIZON,
            window: 10_000,
        }
    }
}

impl BiasSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.cadence == 0 || self.horizon == 0 || self.window < self.n {
            return Err(Error::Config(format!(
                "bias settings need n, cadence, horizon >= 1 and window >= n, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRecord {
    pub step: u64,
    pub estimated_q_mean: f64,
    pub true_q_mean: f64,
    /// `estimated_q_mean - true_q_mean`.
    pub bias: f64,
    pub n_samples: usize,
}

impl BiasRecord {
    pub fn new(step: u64, estimated_q_mean: f64, true_q_mean: f64, n_samples: usize) -> Self {
        Self {
            step,
            estimated_q_mean,
            true_q_mean,
            bias: estimated_q_mean - true_q_mean,
            n_samples,
        }
    }
}

/// Mean discounted return over start pairs: each rollout takes the given first action,
/// then follows `policy` deterministically for `horizon` steps in total.
///
/// Rewards carry fresh noise at the environment's noise level. Episode time limits are
/// ignored; the return is truncated only by the horizon.
pub fn estimate_true_q<E, R>(
    policy: &Network,
    env: &E,
    starts: &[(Vec<f64>, Vec<f64>)],
    gamma: f64,
    horizon: usize,
    rng: &mut R,
) -> Result<f64>
where
    E: Environment + Clone,
    R: Rng + ?Sized,
{
    if starts.is_empty() {
        return Err(Error::domain("no start pairs"));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::domain(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let noise = env.spec().reward_noise;
    let obs_dim = env.spec().obs_dim;
    let mut envs = Vec::with_capacity(starts.len());
    for (state, _) in starts {
        let mut e = env.clone();
        e.restore(state)?;
        envs.push(e);
    }
    let mut returns = vec![0.0; starts.len()];
    let mut discount = 1.0;
    let mut obs = Array2::zeros((starts.len(), obs_dim));
    for t in 0..horizon {
        if discount == 0.0 {
            break;
        }
        let actions = if t == 0 {
            None
        } else {
            for (i, e) in envs.iter().enumerate() {
                obs.row_mut(i).assign(&ndarray::ArrayView1::from(&e.observation()));
            }
            Some(policy.forward(obs.view())?)
        };
        for (i, e) in envs.iter_mut().enumerate() {
            let r = match &actions {
                None => e.advance(&starts[i].1)?,
                Some(a) => e.advance(a.row(i).as_slice().expect("row-major"))?,
            };
            let n: f64 = rng.sample(StandardNormal);
            returns[i] += discount * (r + noise * n);
        }
        discount *= gamma;
    }
    Ok(returns.iter().sum::<f64>() / returns.len() as f64)
}

/// Compare the mean `Q1` estimate with the Monte Carlo value on pairs drawn from recent replay.
pub fn measure_bias<E, R>(
    agent: &Agent,
    env: &E,
    buffer: &crate::replay::ReplayBuffer,
    settings: &BiasSettings,
    step: u64,
    rng: &mut R,
) -> Result<BiasRecord>
where
    E: Environment + Clone,
    R: Rng + ?Sized,
{
    let pairs = buffer.sample_recent_distinct(settings.n, settings.window, rng)?;
    let starts: Vec<(Vec<f64>, Vec<f64>)> = pairs.iter().map(|t| (t.state.clone(), t.action.clone())).collect();
    let layout = buffer.layout();
    let states = Array2::from_shape_fn((starts.len(), layout.obs_dim), |(i, j)| starts[i].0[j]);
    let actions = Array2::from_shape_fn((starts.len(), layout.action_dim()), |(i, j)| starts[i].1[j]);
    let q = agent.q1(states.view(), actions.view())?;
    let estimated = q.sum() / q.len() as f64;
    let truth = estimate_true_q(agent.actor(), env, &starts, agent.gamma(), settings.horizon, rng)?;
    Ok(BiasRecord::new(step, estimated, truth, starts.len()))
}

/// Collects bias records at a fixed cadence during training.
#[derive(Debug, Clone)]
pub struct BiasProbe<E, R> {
    env: E,
    settings: BiasSettings,
    rng: R,
    records: Vec<BiasRecord>,
}

impl<E: Environment + Clone, R: Rng> BiasProbe<E, R> {
    pub fn new(env: E, settings: BiasSettings, rng: R) -> Result<Self> {
        settings.validate()?;
        Ok(Self {
            env,
            settings,
            rng,
            records: Vec::new(),
        })
    }

    /// Measure if `view.step` is a cadence point.
    pub fn observe(&mut self, view: &StepView<'_>) -> Result<Option<&BiasRecord>> {
        if !view.step.is_multiple_of(self.settings.cadence) {
            return Ok(None);
        }
        let rec = measure_bias(view.agent, &self.env, view.buffer, &self.settings, view.step, &mut self.rng)?;
        self.records.push(rec);
        Ok(self.records.last())
    }

    pub fn records(&self) -> &[BiasRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<BiasRecord> {
        self.records
    }
}
