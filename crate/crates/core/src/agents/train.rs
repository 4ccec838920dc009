use serde::{Deserialize, Serialize};

use super::agent::Agent;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::replay::{ReplayBuffer, Transition};
use crate::rng::{Rng, RngStreams, Stream};

/// One run-log row. Losses and the sampled-beta mean cover the updates since the previous row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub step: u64,
    pub eval_return: f64,
    pub critic1_loss: Option<f64>,
    pub critic2_loss: Option<f64>,
    pub beta_lower: Option<f64>,
    pub beta_sampled_mean: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub total_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("eval_every and eval_episodes must be positive".into()));
        }
        Ok(())
    }
}

/// Generators consumed by the training loop.
#[derive(Debug, Clone)]
pub struct TrainRngs {
    pub exploration: Rng,
    pub replay: Rng,
    pub target_noise: Rng,
    pub beta: Rng,
}

impl TrainRngs {
    pub fn from_streams(streams: &RngStreams) -> Self {
        Self {
            exploration: streams.stream(Stream::Exploration),
            replay: streams.stream(Stream::Replay),
            target_noise: streams.stream(Stream::TargetNoise),
            beta: streams.stream(Stream::Beta),
        }
    }
}

/// What a hook sees after each environment step.
pub struct StepView<'a> {
    pub step: u64,
    pub agent: &'a Agent,
    pub buffer: &'a ReplayBuffer,
    /// The record emitted at this step, if any.
    pub record: Option<&'a RunRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HookAction {
    Continue,
    Stop,
}

#[derive(Debug, Default, Clone)]
struct Accumulator {
    losses: [f64; 2],
    updates: u64,
    beta_sum: f64,
    beta_count: u64,
}

/// Interact, store, sample and update.
#[derive(Debug, Clone)]
pub struct Trainer<E: Environment> {
    agent: Agent,
    env: E,
    eval_env: E,
    buffer: ReplayBuffer,
    rngs: TrainRngs,
    observation: Vec<f64>,
    acc: Accumulator,
}

impl<E: Environment> Trainer<E> {
    pub fn new(agent: Agent, mut env: E, eval_env: E, buffer: ReplayBuffer, rngs: TrainRngs) -> Self {
        let observation = env.reset(None);
        Self {
            agent,
            env,
            eval_env,
            buffer,
            rngs,
            observation,
            acc: Accumulator::default(),
        }
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn into_agent(self) -> Agent {
        self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    /// One environment step followed by a learning step once warmup is over.
    pub fn step(&mut self) -> Result<()> {
        let learn = !self.agent.in_warmup();
        let action = self.agent.select_action(&self.observation, true, &mut self.rngs.exploration)?;
        let out = self.env.step(&action)?;
        self.buffer.push(Transition {
            state: std::mem::take(&mut self.observation),
            action,
            reward: out.reward,
            next_state: out.observation.clone(),
            terminal: out.absorbing,
        })?;
        self.observation = if out.terminal { self.env.reset(None) } else { out.observation };
        if learn {
            let TrainRngs { replay, target_noise, beta, .. } = &mut self.rngs;
            let step = self.agent.train_step(&self.buffer, replay, target_noise, beta)?;
            for (slot, loss) in self.acc.losses.iter_mut().zip(&step.losses) {
                *slot += loss;
            }
            self.acc.updates += 1;
            if let Some(b) = step.beta {
                self.acc.beta_sum += b;
                self.acc.beta_count += 1;
            }
        }
        self.agent.end_env_step()
    }

    /// Mean undiscounted noise-free return of the deterministic policy.
    pub fn evaluate(&mut self, episodes: usize) -> Result<f64> {
        let mut total = 0.0;
        for _ in 0..episodes {
            let mut obs = self.eval_env.reset(None);
            loop {
                let action = self.agent.select_action(&obs, false, &mut self.rngs.exploration)?;
                let out = self.eval_env.step(&action)?;
                total += out.base_reward;
                if out.terminal {
                    break;
                }
                obs = out.observation;
            }
        }
        Ok(total / episodes as f64)
    }

    fn record(&mut self, episodes: usize) -> Result<RunRecord> {
        let eval_return = self.evaluate(episodes)?;
        let acc = std::mem::take(&mut self.acc);
        let critics = self.agent.critics().len();
        let loss = |i: usize| (acc.updates > 0 && i < critics).then(|| acc.losses[i] / acc.updates as f64);
        Ok(RunRecord {
            step: self.agent.env_steps(),
            eval_return,
            critic1_loss: loss(0),
            critic2_loss: loss(1),
            beta_lower: self.agent.rule().schedule().map(|s| s.lower()),
            beta_sampled_mean: (acc.beta_count > 0).then(|| acc.beta_sum / acc.beta_count as f64),
        })
    }

    /// Train for `total_steps` environment steps, evaluating every `eval_every` steps and
    /// once more at the end. The hook runs after every step and may stop training early.
    pub fn run<F>(&mut self, settings: TrainSettings, mut hook: F) -> Result<Vec<RunRecord>>
    where
        F: FnMut(StepView<'_>) -> Result<HookAction>,
    {
        settings.validate()?;
        let mut log = Vec::new();
        for i in 1..=settings.total_steps {
            self.step()?;
            let emit = i % settings.eval_every == 0 || i == settings.total_steps;
            if emit {
                let rec = self.record(settings.eval_episodes)?;
                log.push(rec);
            }
            let view = StepView {
                step: i,
                agent: &self.agent,
                buffer: &self.buffer,
                record: if emit { log.last() } else { None },
            };
            if hook(view)? == HookAction::Stop {
                break;
            }
        }
        Ok(log)
    }
}
