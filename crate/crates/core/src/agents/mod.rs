//! Actor-critic agents with interchangeable critic-target rules.

mod agent;
mod schedule;
mod target;
mod train;

pub use agent::{Agent, AgentConfig, Checkpoint, CriticStep};
pub use schedule::{swt_advance, swt_draw_beta, BetaSchedule, DEFAULT_ALPHA, DEFAULT_BETA0};
pub use target::{
    combine_values, compute_target, smoothed_target_action, TargetNets, TargetNoise, TargetOutput, TargetRule,
    DEFAULT_TADD_K,
};
pub use train::{HookAction, RunRecord, StepView, TrainRngs, TrainSettings, Trainer};
