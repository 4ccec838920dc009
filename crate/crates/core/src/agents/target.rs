use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::schedule::{swt_draw_beta, BetaSchedule};
use crate::error::{Error, Result};
use crate::nn::{concat_columns, Network, OutputTransform};

pub const DEFAULT_TADD_K: usize = 3;

/// How the bootstrapped critic target combines the target critics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TargetRule {
    /// Single critic: `Q1'`.
    Ddpg,
    /// `min(Q1', Q2')`.
    ClippedDouble,
    /// `beta * min + (1 - beta) * mean(Q1', Q2')`.
    Wd3 { beta: f64 },
    /// `beta * min + (1 - beta) * mean over the last `k` snapshots of Q3'`.
    Tadd { beta: f64, k: usize },
    /// `min(max(Q1', Q2'), Q3')`.
    Tcd3,
    /// `beta * min + (1 - beta) * Q1'` with `beta` drawn from the schedule.
    Swt { schedule: BetaSchedule },
}

impl TargetRule {
    pub fn validate(&self) -> Result<()> {
        let check_beta = |beta: f64| {
            if (0.0..=1.0).contains(&beta) {
                Ok(())
            } else {
                Err(Error::Config(format!("beta must lie in [0, 1], got {beta}")))
            }
        };
        match self {
            TargetRule::Wd3 { beta } => check_beta(*beta),
            TargetRule::Tadd { beta, k } => {
                check_beta(*beta)?;
                if *k == 0 {
                    return Err(Error::Config("TADD snapshot count must be at least 1".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TargetRule::Ddpg => "ddpg",
            TargetRule::ClippedDouble => "td3",
            TargetRule::Wd3 { .. } => "wd3",
            TargetRule::Tadd { .. } => "tadd",
            TargetRule::Tcd3 => "tcd3",
            TargetRule::Swt { .. } => "swtd3",
        }
    }

    /// Number of critics the agent trains for this rule.
    pub fn critic_count(&self) -> usize {
        match self {
            TargetRule::Ddpg => 1,
            TargetRule::Tadd { .. } | TargetRule::Tcd3 => 3,
            _ => 2,
        }
    }

    /// Number of target critics read by the target computation.
    fn target_critics_needed(&self) -> usize {
        match self {
            TargetRule::Ddpg => 1,
            TargetRule::Tcd3 => 3,
            _ => 2,
        }
    }

    pub fn schedule(&self) -> Option<&BetaSchedule> {
        match self {
            TargetRule::Swt { schedule } => Some(schedule),
            _ => None,
        }
    }

    pub fn schedule_mut(&mut self) -> Option<&mut BetaSchedule> {
        match self {
            TargetRule::Swt { schedule } => Some(schedule),
            _ => None,
        }
    }
}

/// Target-policy smoothing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetNoise {
    pub sigma: f64,
    pub clip: f64,
}

/// Target networks read by [`compute_target`].
#[derive(Debug, Clone, Copy)]
pub struct TargetNets<'a> {
    pub actor: &'a Network,
    pub critics: &'a [Network],
    /// Third-critic target snapshots, oldest first. Only read by TADD.
    pub snapshots: &'a [Network],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetOutput {
    pub y: Array1<f64>,
    /// The mixing weight drawn for SWT, if any.
    pub beta: Option<f64>,
}

/// Target actor output plus clipped Gaussian noise, clipped to the action box.
///
/// The noise is always drawn so the generator advances identically for every setting.
pub fn smoothed_target_action<R: Rng + ?Sized>(
    target_actor: &Network,
    next_states: ArrayView2<f64>,
    noise: TargetNoise,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if noise.clip.is_nan() || noise.clip < 0.0 || noise.sigma.is_nan() || noise.sigma < 0.0 {
        return Err(Error::domain(format!(
            "target noise needs sigma >= 0 and clip >= 0, got {} and {}",
            noise.sigma, noise.clip
        )));
    }
    let mut actions = target_actor.forward(next_states)?;
    let bounds = match target_actor.output_transform() {
        OutputTransform::Bounded { low, high } => Some((low.clone(), high.clone())),
        OutputTransform::Identity => None,
    };
    for mut row in actions.rows_mut() {
        for (j, a) in row.iter_mut().enumerate() {
            let n: f64 = rng.sample(StandardNormal);
            *a += (noise.sigma * n).clamp(-noise.clip, noise.clip);
            if let Some((low, high)) = &bounds {
                *a = a.clamp(low[j], high[j]);
            }
        }
    }
    Ok(actions)
}

fn critic_values(critic: &Network, input: ArrayView2<f64>) -> Result<Array1<f64>> {
    let out = critic.forward(input)?;
    if out.ncols() != 1 {
        return Err(Error::shape(format!("critic must output one value, got {}", out.ncols())));
    }
    Ok(out.column(0).to_owned())
}

fn elementwise(a: &Array1<f64>, b: &Array1<f64>, f: impl Fn(f64, f64) -> f64) -> Array1<f64> {
    Zip::from(a).and(b).map_collect(|&x, &y| f(x, y))
}

/// Combine target-critic values into the state value `V(s')` for a rule.
///
/// `q` holds the target critics' values, `snapshot_q` the TADD snapshot values.
pub fn combine_values(
    rule: &TargetRule,
    q: &[Array1<f64>],
    snapshot_q: &[Array1<f64>],
    beta: Option<f64>,
) -> Result<Array1<f64>> {
    let need = rule.target_critics_needed();
    if q.len() < need {
        return Err(Error::RuleMismatch {
            rule: rule.label(),
            what: format!("needs {need} target critics, got {}", q.len()),
        });
    }
    let min12 = || elementwise(&q[0], &q[1], f64::min);
    Ok(match rule {
        TargetRule::Ddpg => q[0].clone(),
        TargetRule::ClippedDouble => min12(),
        TargetRule::Wd3 { beta } => {
            let b = *beta;
            let w = (1.0 - b) / 2.0;
            Zip::from(&q[0])
                .and(&q[1])
                .map_collect(|&x, &y| b * x.min(y) + w * (x + y))
        }
        TargetRule::Tadd { beta, .. } => {
            if snapshot_q.is_empty() {
                return Err(Error::RuleMismatch {
                    rule: rule.label(),
                    what: "snapshot ring is empty".into(),
                });
            }
            let k = snapshot_q.len() as f64;
            let mut sum = Array1::zeros(q[0].len());
            for s in snapshot_q {
                sum += s;
            }
            let b = *beta;
            let min = min12();
            Zip::from(&min)
                .and(&sum)
                .map_collect(|&m, &s| b * m + (1.0 - b) / k * s)
        }
        TargetRule::Tcd3 => Zip::from(&q[0])
            .and(&q[1])
            .and(&q[2])
            .map_collect(|&a, &b, &c| a.max(b).min(c)),
        TargetRule::Swt { .. } => {
            let b = beta.ok_or_else(|| Error::RuleMismatch {
                rule: rule.label(),
                what: "no beta drawn".into(),
            })?;
            Zip::from(&q[0])
                .and(&q[1])
                .map_collect(|&x, &y| b * x.min(y) + (1.0 - b) * x)
        }
    })
}

/// Bootstrapped target `y = r + mask * gamma * V(s')`.
///
/// Target-smoothing noise comes from `noise_rng`; the SWT weight comes from `beta_rng`.
#[allow(clippy::too_many_arguments)]
pub fn compute_target<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    rule: &TargetRule,
    rewards: ArrayView1<f64>,
    next_states: ArrayView2<f64>,
    not_done: ArrayView1<f64>,
    nets: TargetNets<'_>,
    gamma: f64,
    noise: TargetNoise,
    noise_rng: &mut R1,
    beta_rng: &mut R2,
) -> Result<TargetOutput> {
    let n = rewards.len();
    if next_states.nrows() != n || not_done.len() != n {
        return Err(Error::shape(format!(
            "batch widths disagree: {} rewards, {} next states, {} masks",
            n,
            next_states.nrows(),
            not_done.len()
        )));
    }
    let need = rule.target_critics_needed();
    if nets.critics.len() < need {
        return Err(Error::RuleMismatch {
            rule: rule.label(),
            what: format!("needs {need} target critics, got {}", nets.critics.len()),
        });
    }
    let actions = smoothed_target_action(nets.actor, next_states, noise, noise_rng)?;
    let input = concat_columns(next_states, actions.view());
    let q = nets.critics[..need]
        .iter()
        .map(|c| critic_values(c, input.view()))
        .collect::<Result<Vec<_>>>()?;
    let snapshot_q = match rule {
        TargetRule::Tadd { .. } => nets
            .snapshots
            .iter()
            .map(|c| critic_values(c, input.view()))
            .collect::<Result<Vec<_>>>()?,
        _ => Vec::new(),
    };
    let beta = match rule {
        TargetRule::Swt { schedule } => Some(swt_draw_beta(schedule, beta_rng)),
        _ => None,
    };
    let v = combine_values(rule, &q, &snapshot_q, beta)?;
    let mut y = Array1::zeros(n);
    for i in 0..n {
        y[i] = rewards[i] + not_done[i] * gamma * v[i];
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("critic target".into()));
    }
    Ok(TargetOutput { y, beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn actor(rng: &mut ChaCha8Rng) -> Network {
        Network::init(
            &[3, 8, 1],
            Activation::Relu,
            OutputTransform::Bounded { low: vec![-2.0], high: vec![2.0] },
            rng,
        )
        .unwrap()
    }

    fn critic(rng: &mut ChaCha8Rng) -> Network {
        Network::init(&[4, 8, 1], Activation::Relu, OutputTransform::Identity, rng).unwrap()
    }

    #[test]
    fn zero_sigma_or_zero_clip_returns_actor_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = actor(&mut rng);
        let s = array![[1.0, 0.0, 0.5], [0.0, 1.0, -2.0]];
        let plain = a.forward(s.view()).unwrap();
        let z = smoothed_target_action(&a, s.view(), TargetNoise { sigma: 0.0, clip: 0.5 }, &mut rng).unwrap();
        assert_eq!(z, plain);
        let c = smoothed_target_action(&a, s.view(), TargetNoise { sigma: 0.2, clip: 0.0 }, &mut rng).unwrap();
        assert_eq!(c, plain);
        assert!(smoothed_target_action(&a, s.view(), TargetNoise { sigma: 0.2, clip: -1.0 }, &mut rng).is_err());
    }

    #[test]
    fn smoothing_noise_is_truncated_gaussian() {
        // Zero actor without a box, so the output is exactly the clipped noise.
        let net = Network::new(
            vec![crate::nn::Dense::zeros(1, 1)],
            Activation::Identity,
            OutputTransform::Identity,
        )
        .unwrap();
        let n = 100_000;
        let s = Array2::zeros((n, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let out = smoothed_target_action(&net, s.view(), TargetNoise { sigma: 0.2, clip: 0.5 }, &mut rng).unwrap();
        let xs: Vec<f64> = out.column(0).to_vec();
        assert!(xs.iter().all(|x| x.abs() <= 0.5));
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        // clipping at 2.5 sigma barely changes the spread
        assert!(mean.abs() < 4.0 * 0.2 / (n as f64).sqrt());
        assert!((var.sqrt() - 0.2).abs() < 0.01);
        // mass at the clip boundary: P(|N| > 2.5) = 0.0124
        let at_edge = xs.iter().filter(|x| x.abs() == 0.5).count() as f64 / n as f64;
        assert!((at_edge - 0.012_419_330_651_552_27).abs() < 0.002);
    }

    #[test]
    fn tcd3_needs_a_third_critic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = actor(&mut rng);
        let critics = vec![critic(&mut rng), critic(&mut rng)];
        let s = Array2::zeros((4, 3));
        let r = Array1::zeros(4);
        let m = Array1::ones(4);
        let err = compute_target(
            &TargetRule::Tcd3,
            r.view(),
            s.view(),
            m.view(),
            TargetNets { actor: &a, critics: &critics, snapshots: &[] },
            0.99,
            TargetNoise { sigma: 0.2, clip: 0.5 },
            &mut rng.clone(),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::RuleMismatch { rule: "tcd3", .. }));
    }

    #[test]
    fn equal_critics_collapse_to_single_critic_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = actor(&mut rng);
        let c = critic(&mut rng);
        let critics = vec![c.clone(), c];
        let s = Array2::from_shape_fn((16, 3), |(i, j)| ((i * 3 + j) as f64).sin());
        let r = Array1::from_shape_fn(16, |i| i as f64 * 0.1);
        let mut m = Array1::ones(16);
        m[3] = 0.0;
        let nets = TargetNets { actor: &a, critics: &critics, snapshots: &[] };
        let noise = TargetNoise { sigma: 0.2, clip: 0.5 };
        let target = |rule: &TargetRule| {
            compute_target(rule, r.view(), s.view(), m.view(), nets, 0.99, noise, &mut ChaCha8Rng::seed_from_u64(9), &mut ChaCha8Rng::seed_from_u64(10))
                .unwrap()
                .y
        };
        let base = target(&TargetRule::Ddpg);
        assert_eq!(target(&TargetRule::ClippedDouble), base);
        for beta in [0.0, 0.3, 1.0] {
            let w = target(&TargetRule::Wd3 { beta });
            for (x, y) in w.iter().zip(&base) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let mut sched = BetaSchedule::standard(4);
        sched.advance().unwrap();
        let swt = target(&TargetRule::Swt { schedule: sched });
        for (x, y) in swt.iter().zip(&base) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(base[3], r[3]);
    }

    #[test]
    fn combine_values_by_hand() {
        let q1 = array![1.0, 4.0, -2.0];
        let q2 = array![3.0, 2.0, -5.0];
        let q3 = array![0.0, 5.0, -3.0];
        let q = vec![q1.clone(), q2.clone(), q3.clone()];
        let v = |rule: TargetRule, beta| combine_values(&rule, &q, &[q3.clone(), q1.clone()], beta).unwrap();
        assert_eq!(v(TargetRule::Ddpg, None), q1);
        assert_eq!(v(TargetRule::ClippedDouble, None), array![1.0, 2.0, -5.0]);
        assert_eq!(v(TargetRule::Tcd3, None), array![0.0, 4.0, -3.0]);
        // 0.5 * min + 0.25 * (q1 + q2)
        assert_eq!(v(TargetRule::Wd3 { beta: 0.5 }, None), array![1.5, 2.5, -4.25]);
        // 0.5 * min + 0.5 * mean(q3, q1)
        assert_eq!(v(TargetRule::Tadd { beta: 0.5, k: 3 }, None), array![0.75, 3.25, -3.75]);
        let swt = TargetRule::Swt { schedule: BetaSchedule::standard(1) };
        assert_eq!(v(swt.clone(), Some(0.25)), array![1.0, 3.5, -2.75]);
        assert!(combine_values(&swt, &q, &[], None).is_err());
        assert!(combine_values(&TargetRule::Tadd { beta: 0.5, k: 3 }, &q, &[], None).is_err());
    }

    #[test]
    fn rule_validation() {
        assert!(TargetRule::Wd3 { beta: 1.2 }.validate().is_err());
        assert!(TargetRule::Tadd { beta: 0.5, k: 0 }.validate().is_err());
        assert!(TargetRule::Tadd { beta: 0.5, k: 3 }.validate().is_ok());
        assert_eq!(TargetRule::Ddpg.critic_count(), 1);
        assert_eq!(TargetRule::Tcd3.critic_count(), 3);
    }
}
