//! Experiment configuration and the train / bias / closed-form / compare commands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{
    Agent, AgentConfig, BetaSchedule, HookAction, RunRecord, TargetRule, TrainRngs, TrainSettings, Trainer,
    DEFAULT_ALPHA, DEFAULT_BETA0, DEFAULT_TADD_K,
};
use crate::bias::{BiasProbe, BiasRecord, BiasSettings};
use crate::envs::{Environment, Pendulum, PendulumParams};
use crate::error::{Error, Result};
use crate::gaussian_bias::{mc_order_stats, AnalyticRule, CorrelatedGaussianSpec, OrderStatistic};
use crate::replay::{ReplayBuffer, DEFAULT_CAPACITY};
use crate::rng::{RngStreams, Stream};

pub const RUN_LOG: &str = "run_log.csv";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const MANIFEST: &str = "manifest.json";
pub const CLOSED_FORM_CSV: &str = "closed_form.csv";
pub const COMPARE_CSV: &str = "compare.csv";
pub const COMPARE_TXT: &str = "compare.txt";
/// Evaluations averaged per seed by the comparison.
pub const LAST_EVALS: usize = 10;

/// Per-task mixing weights `(wd3, tadd)` for the MuJoCo and Box2D benchmark tasks.
pub const TASK_BETAS: [(&str, f64, f64); 12] = [
    ("Ant-v2", 0.75, 0.95),
    ("BipedalWalker-v3", 0.5, 0.5),
    ("HalfCheetah-v2", 0.45, 0.95),
    ("Hopper-v2", 0.50, 0.95),
    ("HumanoidStandup-v2", 0.30, 0.30),
    ("Humanoid-v2", 0.30, 0.30),
    ("InvertedDoublePendulum-v2", 0.75, 0.95),
    ("InvertedPendulum-v2", 0.75, 0.95),
    ("LunarLanderContinuous-v2", 0.45, 0.45),
    ("Reacher-v2", 0.15, 0.95),
    ("Swimmer-v2", 0.45, 0.20),
    ("Walker2d-v2", 0.45, 0.95),
];

/// A mixing weight given directly or by benchmark task name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Value(f64),
    Task { task: String },
}

impl BetaSpec {
    fn resolve(&self, tadd: bool) -> Result<f64> {
        match self {
            BetaSpec::Value(b) => Ok(*b),
            BetaSpec::Task { task } => TASK_BETAS
                .iter()
                .find(|(name, _, _)| name == task)
                .map(|&(_, w, t)| if tadd { t } else { w })
                .ok_or_else(|| Error::Config(format!("no preset weight for task {task:?}"))),
        }
    }
}

fn default_k() -> usize {
    DEFAULT_TADD_K
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", deny_unknown_fields)]
pub enum RuleConfig {
    #[serde(rename = "ddpg")]
    Ddpg,
    #[serde(rename = "td3")]
    Td3,
    #[serde(rename = "wd3")]
    Wd3 { beta: BetaSpec },
    #[serde(rename = "tadd")]
    Tadd {
        beta: BetaSpec,
        #[serde(default = "default_k")]
        k: usize,
    },
    #[serde(rename = "tcd3")]
    Tcd3,
    #[serde(rename = "swtd3")]
    Swtd3 {
        #[serde(default = "default_alpha")]
        alpha: f64,
        /// Schedule length; defaults to the run length.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<u64>,
    },
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig::Swtd3 { alpha: DEFAULT_ALPHA, horizon: None }
    }
}

impl RuleConfig {
    pub fn build(&self, total_steps: u64) -> Result<TargetRule> {
        let rule = match self {
            RuleConfig::Ddpg => TargetRule::Ddpg,
            RuleConfig::Td3 => TargetRule::ClippedDouble,
            RuleConfig::Wd3 { beta } => TargetRule::Wd3 { beta: beta.resolve(false)? },
            RuleConfig::Tadd { beta, k } => TargetRule::Tadd { beta: beta.resolve(true)?, k: *k },
            RuleConfig::Tcd3 => TargetRule::Tcd3,
            RuleConfig::Swtd3 { alpha, horizon } => TargetRule::Swt {
                schedule: BetaSchedule::new(DEFAULT_BETA0, *alpha, horizon.unwrap_or(total_steps))?,
            },
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn label(&self) -> &'static str {
        match self {
            RuleConfig::Ddpg => "ddpg",
            RuleConfig::Td3 => "td3",
            RuleConfig::Wd3 { .. } => "wd3",
            RuleConfig::Tadd { .. } => "tadd",
            RuleConfig::Tcd3 => "tcd3",
            RuleConfig::Swtd3 { .. } => "swtd3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub name: String,
    pub reward_noise: f64,
    pub max_episode_steps: usize,
    pub gamma: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        let p = PendulumParams::default();
        Self {
            name: "pendulum".into(),
            reward_noise: p.reward_noise,
            max_episode_steps: p.max_episode_steps,
            gamma: p.gamma,
        }
    }
}

impl EnvConfig {
    pub fn build(&self, reward_noise: f64, seed: u64) -> Result<Pendulum> {
        if self.name != "pendulum" {
            return Err(Error::Config(format!("unknown environment {:?}", self.name)));
        }
        Pendulum::new(
            PendulumParams {
                reward_noise,
                max_episode_steps: self.max_episode_steps,
                gamma: self.gamma,
            },
            seed,
        )
    }
}

/// Grid for the closed-form table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosedFormGrid {
    pub mu: Vec<f64>,
    pub theta: Vec<f64>,
    /// Number of evenly spaced weights on `[0, 1]`.
    pub beta_points: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for ClosedFormGrid {
    fn default() -> Self {
        Self {
            mu: vec![0.0, 1.0],
            theta: vec![0.5, 1.0, 2.0],
            beta_points: 21,
            samples: 1_000_000,
            seed: 0,
        }
    }
}

impl ClosedFormGrid {
    pub fn validate(&self) -> Result<()> {
        if self.mu.is_empty() || self.theta.is_empty() || self.beta_points < 2 {
            return Err(Error::Config("closed-form grid needs mu, theta and at least 2 beta points".into()));
        }
        if self.mu.iter().any(|m| !m.is_finite()) || self.theta.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config("closed-form grid needs finite mu and theta >= 0".into()));
        }
        if self.samples < crate::gaussian_bias::MIN_SAMPLES {
            return Err(Error::Config(format!(
                "closed-form grid needs at least {} samples",
                crate::gaussian_bias::MIN_SAMPLES
            )));
        }
        Ok(())
    }

    pub fn betas(&self) -> Vec<f64> {
        let last = (self.beta_points - 1) as f64;
        (0..self.beta_points).map(|i| i as f64 / last).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rule: RuleConfig,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub seeds: Vec<u64>,
    pub total_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub replay_capacity: usize,
    pub bias: BiasSettings,
    /// Reward-noise levels for the bias command; empty means the environment's own level.
    pub noise_sweep: Vec<f64>,
    pub output_dir: PathBuf,
    pub closed_form: ClosedFormGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rule: RuleConfig::default(),
            env: EnvConfig::default(),
            agent: AgentConfig::default(),
            seeds: vec![0],
            total_steps: 30_000,
            eval_every: 1000,
            eval_episodes: 10,
            replay_capacity: DEFAULT_CAPACITY,
            bias: BiasSettings::default(),
            noise_sweep: Vec::new(),
            output_dir: PathBuf::from("out"),
            closed_form: ClosedFormGrid::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Shipped configuration for a rule name.
    pub fn preset(name: &str) -> Result<Self> {
        let rule = match name {
            "ddpg" => RuleConfig::Ddpg,
            "td3" => RuleConfig::Td3,
            "wd3" => RuleConfig::Wd3 { beta: BetaSpec::Task { task: "InvertedPendulum-v2".into() } },
            "tadd" => RuleConfig::Tadd {
                beta: BetaSpec::Task { task: "InvertedPendulum-v2".into() },
                k: DEFAULT_TADD_K,
            },
            "tcd3" => RuleConfig::Tcd3,
            "swtd3" => RuleConfig::default(),
            other => return Err(Error::Config(format!("no preset named {other:?}"))),
        };
        Ok(Self { rule, ..Self::default() })
    }

    pub fn validate(&self) -> Result<()> {
        self.rule.build(self.total_steps)?;
        self.env.build(self.env.reward_noise, 0)?;
        self.agent.validate()?;
        self.bias.validate()?;
        self.closed_form.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        TrainSettings {
            total_steps: self.total_steps,
            eval_every: self.eval_every,
            eval_episodes: self.eval_episodes,
        }
        .validate()?;
        if self.replay_capacity == 0 {
            return Err(Error::Config("replay_capacity must be positive".into()));
        }
        if self.noise_sweep.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("noise_sweep levels must be >= 0".into()));
        }
        Ok(())
    }

    pub fn train_settings(&self) -> TrainSettings {
        TrainSettings {
            total_steps: self.total_steps,
            eval_every: self.eval_every,
            eval_episodes: self.eval_episodes,
        }
    }

    fn noise_levels(&self) -> Vec<f64> {
        if self.noise_sweep.is_empty() {
            vec![self.env.reward_noise]
        } else {
            self.noise_sweep.clone()
        }
    }

    pub fn seed_dir(&self, root: &Path, seed: u64) -> PathBuf {
        root.join(self.rule.label()).join(seed.to_string())
    }
}

/// Outcome of training one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub log: Vec<RunRecord>,
    pub bias: Vec<BiasRecord>,
    pub agent: Agent,
}

/// Options for [`run_seed`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub reward_noise: Option<f64>,
    pub measure_bias: bool,
    /// Stop after the first evaluation at or above this return.
    pub stop_at_return: Option<f64>,
}

/// Train one seed. Every random draw derives from `seed` through named substreams.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, opts: RunOptions) -> Result<SeedRun> {
    let streams = RngStreams::new(seed);
    let noise = opts.reward_noise.unwrap_or(cfg.env.reward_noise);
    let env = cfg.env.build(noise, streams.derived_seed(Stream::Env))?;
    let eval_env = cfg.env.build(noise, streams.derived_seed(Stream::EvalEnv))?;
    let probe_env = env.clone();
    let rule = cfg.rule.build(cfg.total_steps)?;
    let agent = Agent::new(cfg.agent.clone(), env.spec(), rule, &mut streams.stream(Stream::Init))?;
    let buffer = ReplayBuffer::new(cfg.replay_capacity, env.spec().layout())?;
    let mut trainer = Trainer::new(agent, env, eval_env, buffer, TrainRngs::from_streams(&streams));
    let mut probe = BiasProbe::new(probe_env, cfg.bias, streams.stream(Stream::BiasProbe))?;
    let log = trainer.run(cfg.train_settings(), |view| {
        if opts.measure_bias {
            probe.observe(&view)?;
        }
        match (opts.stop_at_return, view.record) {
            (Some(goal), Some(rec)) if rec.eval_return >= goal => Ok(HookAction::Stop),
            _ => Ok(HookAction::Continue),
        }
    })?;
    Ok(SeedRun {
        seed,
        log,
        bias: probe.into_records(),
        agent: trainer.into_agent(),
    })
}

/// Run `job` for every seed on scoped threads, keeping seed order in the result.
fn for_each_seed<T, F>(seeds: &[u64], job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).max(1);
    let mut out = Vec::with_capacity(seeds.len());
    for chunk in seeds.chunks(workers) {
        let results: Vec<Result<T>> = std::thread::scope(|s| {
            let job = &job;
            let handles: Vec<_> = chunk.iter().map(|&seed| s.spawn(move || job(seed))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::domain("worker thread panicked"))))
                .collect()
        });
        for r in results {
            out.push(r?);
        }
    }
    Ok(out)
}

pub fn write_run_log(path: &Path, log: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if log.is_empty() {
        w.write_record(["step", "eval_return", "critic1_loss", "critic2_loss", "beta_lower", "beta_sampled_mean"])?;
    }
    for r in log {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_run_log(path: &Path) -> Result<Vec<RunRecord>> {
    let corrupt = |reason: String| Error::CorruptLog { path: path.to_path_buf(), reason };
    let mut r = csv::Reader::from_path(path).map_err(|e| corrupt(e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| corrupt(e.to_string())))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct BiasRow {
    step: u64,
    estimated_q: f64,
    true_q: f64,
    bias: f64,
    n: usize,
}

pub fn write_bias_csv(path: &Path, records: &[BiasRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if records.is_empty() {
        w.write_record(["step", "estimated_q", "true_q", "bias", "n"])?;
    }
    for r in records {
        w.serialize(BiasRow {
            step: r.step,
            estimated_q: r.estimated_q_mean,
            true_q: r.true_q_mean,
            bias: r.bias,
            n: r.n_samples,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bias_csv(path: &Path) -> Result<Vec<BiasRecord>> {
    let corrupt = |reason: String| Error::CorruptLog { path: path.to_path_buf(), reason };
    let mut r = csv::Reader::from_path(path).map_err(|e| corrupt(e.to_string()))?;
    r.deserialize::<BiasRow>()
        .map(|row| {
            row.map(|b| BiasRecord::new(b.step, b.estimated_q, b.true_q, b.n))
                .map_err(|e| corrupt(e.to_string()))
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    seed: u64,
    reward_noise: f64,
    config: &'a ExperimentConfig,
}

fn write_manifest(dir: &Path, cfg: &ExperimentConfig, seed: u64, reward_noise: f64) -> Result<()> {
    let m = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        seed,
        reward_noise,
        config: cfg,
    };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}

/// Train every seed; writes `run_log.csv`, `checkpoint.json` and `manifest.json`
/// under `<root>/<rule>/<seed>/`. Returns the seed directories.
pub fn cmd_train(cfg: &ExperimentConfig, root: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let runs = for_each_seed(&cfg.seeds, |seed| run_seed(cfg, seed, RunOptions::default()))?;
    let mut dirs = Vec::new();
    for run in runs {
        let dir = cfg.seed_dir(root, run.seed);
        fs::create_dir_all(&dir)?;
        write_run_log(&dir.join(RUN_LOG), &run.log)?;
        fs::write(dir.join(CHECKPOINT), serde_json::to_string(&run.agent.checkpoint())?)?;
        write_manifest(&dir, cfg, run.seed, cfg.env.reward_noise)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

/// File name of the bias table for a reward-noise level.
pub fn bias_file_name(reward_noise: f64) -> String {
    format!("bias_nu{reward_noise}.csv")
}

/// Train with interleaved bias measurement for every seed and noise level;
/// writes `bias_nu<level>.csv` into each seed directory. Returns the CSV paths.
pub fn cmd_bias(cfg: &ExperimentConfig, root: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mut paths = Vec::new();
    for nu in cfg.noise_levels() {
        let opts = RunOptions { reward_noise: Some(nu), measure_bias: true, stop_at_return: None };
        let runs = for_each_seed(&cfg.seeds, |seed| run_seed(cfg, seed, opts))?;
        for run in runs {
            let dir = cfg.seed_dir(root, run.seed);
            fs::create_dir_all(&dir)?;
            let path = dir.join(bias_file_name(nu));
            write_bias_csv(&path, &run.bias)?;
            write_manifest(&dir, cfg, run.seed, nu)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

/// One row of the closed-form table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormRow {
    pub rule: String,
    pub beta: f64,
    pub mu: f64,
    pub theta: f64,
    pub analytic: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
}

/// Analytic expected target error of every rule with Monte Carlo estimates from
/// shared draws at each `(mu, theta)` grid point.
pub fn closed_form_table(grid: &ClosedFormGrid) -> Result<Vec<ClosedFormRow>> {
    grid.validate()?;
    let betas = grid.betas();
    let mut rows = Vec::new();
    let mut point = 0u64;
    for &mu in &grid.mu {
        for &theta in &grid.theta {
            let mut pair_stats = Vec::new();
            let mut triple_stats = Vec::new();
            let mut plan = Vec::new();
            for &beta in &betas {
                for rule in AnalyticRule::ALL {
                    let stat = rule.statistic(beta);
                    let slot = if stat.arity() == 2 { &mut pair_stats } else { &mut triple_stats };
                    let idx = slot.iter().position(|s: &OrderStatistic| *s == stat).unwrap_or_else(|| {
                        slot.push(stat);
                        slot.len() - 1
                    });
                    plan.push((rule, beta, stat.arity(), idx));
                }
            }
            let seed = grid.seed.wrapping_mul(1_000_003).wrapping_add(point);
            point += 1;
            let pair = mc_order_stats(&CorrelatedGaussianSpec::from_theta(mu, theta, 2)?, &pair_stats, grid.samples, seed)?;
            let triple = mc_order_stats(
                &CorrelatedGaussianSpec::from_theta(mu, theta, 3)?,
                &triple_stats,
                grid.samples,
                seed ^ 0x5eed,
            )?;
            for (rule, beta, arity, idx) in plan {
                let mc = if arity == 2 { pair[idx] } else { triple[idx] };
                rows.push(ClosedFormRow {
                    rule: rule.label().into(),
                    beta,
                    mu,
                    theta,
                    analytic: rule.expected_error(beta, mu, theta)?,
                    mc_mean: mc.mean,
                    mc_se: mc.standard_error,
                });
            }
        }
    }
    Ok(rows)
}

/// Write the closed-form table to `<root>/closed_form.csv`.
pub fn cmd_closed_form(cfg: &ExperimentConfig, root: &Path) -> Result<PathBuf> {
    cfg.closed_form.validate()?;
    let rows = closed_form_table(&cfg.closed_form)?;
    fs::create_dir_all(root)?;
    let path = root.join(CLOSED_FORM_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(path)
}

/// Per-rule summary of the final evaluation returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub rule: String,
    pub seeds: usize,
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
}

/// Mean of the last [`LAST_EVALS`] evaluation returns of one run.
pub fn final_score(log: &[RunRecord]) -> Option<f64> {
    if log.is_empty() {
        return None;
    }
    let tail = &log[log.len().saturating_sub(LAST_EVALS)..];
    Some(tail.iter().map(|r| r.eval_return).sum::<f64>() / tail.len() as f64)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Collect `<root>/<rule>/<seed>/run_log.csv` from every root and summarize per rule.
pub fn compare_runs(roots: &[PathBuf]) -> Result<Vec<CompareRow>> {
    let mut scores: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for root in roots {
        let rules = fs::read_dir(root)
            .map_err(|e| Error::CorruptLog { path: root.clone(), reason: e.to_string() })?;
        let mut rule_dirs: Vec<PathBuf> = rules.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
        rule_dirs.sort();
        for rule_dir in rule_dirs {
            let mut seed_dirs: Vec<PathBuf> = fs::read_dir(&rule_dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.join(RUN_LOG).is_file())
                .collect();
            seed_dirs.sort();
            for dir in seed_dirs {
                let path = dir.join(RUN_LOG);
                let log = read_run_log(&path)?;
                let score = final_score(&log).ok_or_else(|| Error::CorruptLog {
                    path: path.clone(),
                    reason: "no evaluation records".into(),
                })?;
                let rule = rule_dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                scores.entry(rule).or_default().push(score);
            }
        }
    }
    if scores.is_empty() {
        return Err(Error::CorruptLog {
            path: roots.first().cloned().unwrap_or_default(),
            reason: format!("no {RUN_LOG} found"),
        });
    }
    Ok(scores
        .into_iter()
        .map(|(rule, xs)| {
            let (mean, std) = mean_std(&xs);
            CompareRow { rule, seeds: xs.len(), mean, std }
        })
        .collect())
}

/// Aligned plain-text table of a comparison.
pub fn render_table(rows: &[CompareRow]) -> String {
    let width = rows.iter().map(|r| r.rule.len()).max().unwrap_or(0).max(4);
    let mut out = format!("{:<width$}  {:>5}  {:>12}  {:>10}\n", "rule", "seeds", "mean", "std");
    for r in rows {
        out += &format!("{:<width$}  {:>5}  {:>12.2}  {:>10.2}\n", r.rule, r.seeds, r.mean, r.std);
    }
    out
}

/// Summarize the runs under `roots`; writes `compare.csv` and `compare.txt` into `out`.
pub fn cmd_compare(roots: &[PathBuf], out: &Path) -> Result<Vec<CompareRow>> {
    let rows = compare_runs(roots)?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join(COMPARE_CSV))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    fs::write(out.join(COMPARE_TXT), render_table(&rows))?;
    Ok(rows)
}
