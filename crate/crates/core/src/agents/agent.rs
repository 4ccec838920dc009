use std::collections::VecDeque;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::target::{compute_target, TargetNets, TargetNoise, TargetOutput, TargetRule};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, concat_columns, grad_dpg, grad_mse, soft_update, Activation, AdamConfig, AdamState, Network,
    OutputTransform,
};
use crate::replay::{Batch, ReplayBuffer};

/// Agent hyperparameters. Noise scales are fractions of the action half-range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub policy_delay: u64,
    pub exploration_noise: f64,
    pub target_noise: f64,
    pub noise_clip: f64,
    pub batch_size: usize,
    pub warmup_steps: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            tau: 0.005,
            policy_delay: 2,
            exploration_noise: 0.1,
            target_noise: 0.2,
            noise_clip: 0.5,
            batch_size: 256,
            warmup_steps: 1000,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!("hidden widths must be non-empty and positive, got {:?}", self.hidden));
        }
        for (name, lr) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(lr.is_finite() && lr > 0.0) {
                return bad(format!("{name} must be positive, got {lr}"));
            }
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        if self.policy_delay == 0 {
            return bad("policy_delay must be at least 1".into());
        }
        for (name, v) in [
            ("exploration_noise", self.exploration_noise),
            ("target_noise", self.target_noise),
            ("noise_clip", self.noise_clip),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        Ok(())
    }
}

/// Result of one critic update.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticStep {
    pub losses: Vec<f64>,
    pub beta: Option<f64>,
    /// The shared target every critic regressed on.
    pub target: Array1<f64>,
}

/// Serializable network snapshot of an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub rule: TargetRule,
    pub actor: Network,
    pub actor_target: Network,
    pub critics: Vec<Network>,
    pub critic_targets: Vec<Network>,
    pub env_steps: u64,
    pub updates: u64,
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    gamma: f64,
    action_low: Vec<f64>,
    action_high: Vec<f64>,
    rule: TargetRule,
    actor: Network,
    actor_target: Network,
    critics: Vec<Network>,
    critic_targets: Vec<Network>,
    actor_opt: AdamState,
    critic_opts: Vec<AdamState>,
    snapshots: VecDeque<Network>,
    env_steps: u64,
    updates: u64,
}

impl Agent {
    /// Build an agent; actor then critics are initialized from `rng` in that order.
    pub fn new<R: Rng + ?Sized>(config: AgentConfig, spec: &EnvSpec, rule: TargetRule, rng: &mut R) -> Result<Self> {
        config.validate()?;
        spec.validate()?;
        rule.validate()?;
        let act = spec.action_dim();
        let mut actor_sizes = vec![spec.obs_dim];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(act);
        let bounds = OutputTransform::Bounded {
            low: spec.action_low.clone(),
            high: spec.action_high.clone(),
        };
        let actor = Network::init(&actor_sizes, Activation::Relu, bounds, rng)?;
        let mut critic_sizes = vec![spec.obs_dim + act];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);
        let critics = (0..rule.critic_count())
            .map(|_| Network::init(&critic_sizes, Activation::Relu, OutputTransform::Identity, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_networks(config, spec, rule, actor, critics)
    }

    /// Assemble an agent around given behavioral networks; targets start as copies.
    pub fn from_networks(
        config: AgentConfig,
        spec: &EnvSpec,
        rule: TargetRule,
        actor: Network,
        critics: Vec<Network>,
    ) -> Result<Self> {
        config.validate()?;
        rule.validate()?;
        if critics.len() != rule.critic_count() {
            return Err(Error::RuleMismatch {
                rule: rule.label(),
                what: format!("expects {} critics, got {}", rule.critic_count(), critics.len()),
            });
        }
        if actor.input_width() != spec.obs_dim || actor.output_width() != spec.action_dim() {
            return Err(Error::shape("actor does not match the environment"));
        }
        for c in &critics {
            if c.input_width() != spec.obs_dim + spec.action_dim() || c.output_width() != 1 {
                return Err(Error::shape("critic does not match the environment"));
            }
        }
        let actor_opt = AdamState::new(&actor, AdamConfig::with_lr(config.actor_lr));
        let critic_opts = critics
            .iter()
            .map(|c| AdamState::new(c, AdamConfig::with_lr(config.critic_lr)))
            .collect();
        let mut snapshots = VecDeque::new();
        if let TargetRule::Tadd { .. } = rule {
            snapshots.push_back(critics[2].clone());
        }
        Ok(Self {
            gamma: spec.gamma,
            action_low: spec.action_low.clone(),
            action_high: spec.action_high.clone(),
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            critics,
            actor_opt,
            critic_opts,
            snapshots,
            rule,
            config,
            env_steps: 0,
            updates: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rule(&self) -> &TargetRule {
        &self.rule
    }

    pub fn rule_mut(&mut self) -> &mut TargetRule {
        &mut self.rule
    }

    pub fn actor(&self) -> &Network {
        &self.actor
    }

    pub fn actor_target(&self) -> &Network {
        &self.actor_target
    }

    pub fn critics(&self) -> &[Network] {
        &self.critics
    }

    pub fn critics_mut(&mut self) -> &mut [Network] {
        &mut self.critics
    }

    pub fn critic_targets(&self) -> &[Network] {
        &self.critic_targets
    }

    pub fn snapshots(&self) -> impl ExactSizeIterator<Item = &Network> + '_ {
        self.snapshots.iter()
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn half_range(&self, j: usize) -> f64 {
        (self.action_high[j] - self.action_low[j]) / 2.0
    }

    fn max_half_range(&self) -> f64 {
        (0..self.action_low.len()).map(|j| self.half_range(j)).fold(0.0, f64::max)
    }

    pub fn target_noise(&self) -> TargetNoise {
        let scale = self.max_half_range();
        TargetNoise {
            sigma: self.config.target_noise * scale,
            clip: self.config.noise_clip * scale,
        }
    }

    pub fn in_warmup(&self) -> bool {
        self.env_steps < self.config.warmup_steps
    }

    /// Behavior action. With `explore`, warmup steps are uniform over the box and later
    /// steps add Gaussian noise to the actor output; the result is clipped to the box.
    pub fn select_action<R: Rng + ?Sized>(&self, state: &[f64], explore: bool, rng: &mut R) -> Result<Vec<f64>> {
        if explore && self.in_warmup() {
            return Ok(self
                .action_low
                .iter()
                .zip(&self.action_high)
                .map(|(&l, &h)| l + (h - l) * rng.random::<f64>())
                .collect());
        }
        let mut action = self.actor.forward_one(state)?;
        for (j, a) in action.iter_mut().enumerate() {
            if explore {
                let n: f64 = rng.sample(StandardNormal);
                *a += self.config.exploration_noise * self.half_range(j) * n;
            }
            *a = a.clamp(self.action_low[j], self.action_high[j]);
        }
        Ok(action)
    }

    /// `Q1(s, a)` for each row.
    pub fn q1(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Array1<f64>> {
        let out = self.critics[0].forward(concat_columns(states, actions).view())?;
        Ok(out.index_axis(Axis(1), 0).to_owned())
    }

    pub fn compute_target<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &self,
        batch: &Batch,
        noise_rng: &mut R1,
        beta_rng: &mut R2,
    ) -> Result<TargetOutput> {
        let snapshots: Vec<Network> = self.snapshots.iter().cloned().collect();
        compute_target(
            &self.rule,
            batch.rewards.view(),
            batch.next_states.view(),
            batch.not_done.view(),
            TargetNets {
                actor: &self.actor_target,
                critics: &self.critic_targets,
                snapshots: &snapshots,
            },
            self.gamma,
            self.target_noise(),
            noise_rng,
            beta_rng,
        )
    }

    /// One Adam step on every critic against the shared target.
    pub fn critic_update<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        noise_rng: &mut R1,
        beta_rng: &mut R2,
    ) -> Result<CriticStep> {
        let TargetOutput { y, beta } = self.compute_target(batch, noise_rng, beta_rng)?;
        let inputs = concat_columns(batch.states.view(), batch.actions.view());
        let targets = y.view().insert_axis(Axis(1));
        let mut losses = Vec::with_capacity(self.critics.len());
        let mut grads = Vec::with_capacity(self.critics.len());
        for critic in &self.critics {
            let (g, loss) = grad_mse(critic, inputs.view(), targets)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("critic loss".into()));
            }
            grads.push(g);
            losses.push(loss);
        }
        for ((critic, opt), g) in self.critics.iter_mut().zip(&mut self.critic_opts).zip(&grads) {
            adam_step(critic, g, opt)?;
        }
        Ok(CriticStep { losses, beta, target: y })
    }

    /// On every `d`-th `step`: a policy-gradient step through `Q1` only, then Polyak
    /// updates of all targets. Returns the actor objective when an update happened.
    pub fn actor_update_and_sync(&mut self, states: ArrayView2<f64>, step: u64) -> Result<Option<f64>> {
        if !step.is_multiple_of(self.config.policy_delay) {
            return Ok(None);
        }
        let (mut grads, objective) = grad_dpg(&self.actor, &self.critics[0], states)?;
        grads.scale(-1.0);
        adam_step(&mut self.actor, &grads, &mut self.actor_opt)?;
        let tau = self.config.tau;
        for (target, critic) in self.critic_targets.iter_mut().zip(&self.critics) {
            soft_update(target, critic, tau)?;
        }
        soft_update(&mut self.actor_target, &self.actor, tau)?;
        if let TargetRule::Tadd { k, .. } = self.rule {
            self.snapshots.push_back(self.critic_targets[2].clone());
            while self.snapshots.len() > k {
                self.snapshots.pop_front();
            }
        }
        Ok(Some(objective))
    }

    /// Polyak update of the critic targets alone, leaving the actor and its target fixed.
    pub fn sync_critic_targets(&mut self) -> Result<()> {
        let tau = self.config.tau;
        for (target, critic) in self.critic_targets.iter_mut().zip(&self.critics) {
            soft_update(target, critic, tau)?;
        }
        Ok(())
    }

    /// Sample a batch, update the critics, and run the delayed actor update.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        replay_rng: &mut R,
        noise_rng: &mut R,
        beta_rng: &mut R,
    ) -> Result<CriticStep> {
        let batch = buffer.sample(self.config.batch_size, replay_rng)?;
        self.updates += 1;
        let step = self.critic_update(&batch, noise_rng, beta_rng)?;
        self.actor_update_and_sync(batch.states.view(), self.updates)?;
        Ok(step)
    }

    /// Bookkeeping at the end of an environment step: advances the SWT schedule.
    pub fn end_env_step(&mut self) -> Result<()> {
        self.env_steps += 1;
        if let Some(s) = self.rule.schedule_mut() {
            if !s.is_exhausted() {
                s.advance()?;
            }
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            rule: self.rule.clone(),
            actor: self.actor.clone(),
            actor_target: self.actor_target.clone(),
            critics: self.critics.clone(),
            critic_targets: self.critic_targets.clone(),
            env_steps: self.env_steps,
            updates: self.updates,
        }
    }

    /// Deterministic actions for a batch of states.
    pub fn policy(&self, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.actor.forward(states)
    }
}
