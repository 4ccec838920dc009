//! Closed-form expected estimation errors of critic-target rules.
//!
//! Critic errors are modelled as jointly Gaussian random variables
//! `N_i ~ N(mu_i, sigma_i^2)` with a common pairwise correlation `rho`.
//! The pooled deviation of a pair is `theta = sqrt(s1^2 + s2^2 - 2 rho s1 s2)`,
//! the standard deviation of `N_1 - N_2`.
//!
//! The `*_equal_means` functions are the equal-mean specialisations used to
//! compare the target rules; [`expected_min2`] and [`expected_max2`] are the
//! general two-variable forms.

mod oracle;

pub use oracle::{mc_order_stat_oracle, mc_order_stats, McEstimate, OrderStatistic, MIN_SAMPLES};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sqrt(2 * pi)`.
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Means, standard deviations and common pairwise correlation of two or three critic errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedGaussianSpec {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    rho: f64,
}

impl CorrelatedGaussianSpec {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>, rho: f64) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::domain(format!(
                "mu has {} entries but sigma has {}",
                mu.len(),
                sigma.len()
            )));
        }
        if !(2..=3).contains(&mu.len()) {
            return Err(Error::domain(format!("expected 2 or 3 variables, got {}", mu.len())));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::domain("means must be finite"));
        }
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::domain(format!("sigma must be strictly positive, got {s}")));
        }
        check_rho(rho)?;
        Ok(Self { mu, sigma, rho })
    }

    /// Two variables sharing a mean.
    pub fn equal_means2(mu: f64, sigma: [f64; 2], rho: f64) -> Result<Self> {
        Self::new(vec![mu; 2], sigma.to_vec(), rho)
    }

    /// Three exchangeable variables: shared mean, shared sigma, common correlation.
    pub fn exchangeable3(mu: f64, sigma: f64, rho: f64) -> Result<Self> {
        Self::new(vec![mu; 3], vec![sigma; 3], rho)
    }

    /// Equal-mean pair or triple realising a given pooled deviation `theta`.
    ///
    /// Uses independent errors with `sigma = theta / sqrt(2)`; `theta = 0` maps to
    /// perfectly correlated unit-variance errors.
    pub fn from_theta(mu: f64, theta: f64, arity: usize) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::domain(format!("theta must be nonnegative, got {theta}")));
        }
        let (sigma, rho) = if theta == 0.0 {
            (1.0, 1.0)
        } else {
            (theta / std::f64::consts::SQRT_2, 0.0)
        };
        Self::new(vec![mu; arity], vec![sigma; arity], rho)
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Pooled deviation of variables `i` and `j`.
    pub fn theta(&self, i: usize, j: usize) -> f64 {
        // sigma and rho were validated on construction
        pooled(self.sigma[i], self.sigma[j], self.rho)
    }
}

/// Expected error of one target rule together with the pooled deviation it was evaluated at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub rule_name: String,
    pub expected_error: f64,
    pub theta: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::domain(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    Ok(())
}

fn pooled(s1: f64, s2: f64, rho: f64) -> f64 {
    (s1 * s1 + s2 * s2 - 2.0 * rho * s1 * s2).max(0.0).sqrt()
}

/// Standard deviation of the difference of two correlated Gaussians.
pub fn theta_of(s1: f64, s2: f64, rho: f64) -> Result<f64> {
    if !(s1 > 0.0 && s2 > 0.0) {
        return Err(Error::domain(format!("sigmas must be positive, got {s1} and {s2}")));
    }
    check_rho(rho)?;
    Ok(pooled(s1, s2, rho))
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn two_entries(spec: &CorrelatedGaussianSpec) -> Result<(f64, f64, f64)> {
    if spec.len() != 2 {
        return Err(Error::domain(format!(
            "two-variable expectation needs exactly 2 entries, got {}",
            spec.len()
        )));
    }
    Ok((spec.mu[0], spec.mu[1], spec.theta(0, 1)))
}

/// `E[min(N1, N2)]` for arbitrary means (Clipped Double Q-learning error).
///
/// With `z = (mu1 - mu2) / theta` this is `mu2 + (mu1 - mu2) Phi(-z) - theta psi(z)`,
/// i.e. `mu2 - E[(N2 - N1)^+]`. At equal means it reduces to `mu - theta / sqrt(2 pi)`.
/// When `theta == 0` the difference `N1 - N2` is deterministic and the result
/// is `min(mu1, mu2)`.
pub fn expected_min2(spec: &CorrelatedGaussianSpec) -> Result<f64> {
    let (m1, m2, theta) = two_entries(spec)?;
    if theta == 0.0 {
        return Ok(m1.min(m2));
    }
    let z = (m1 - m2) / theta;
    Ok(m2 + (m1 - m2) * std_normal_cdf(-z) - theta * std_normal_pdf(z))
}

/// `E[max(N1, N2)]` for arbitrary means.
pub fn expected_max2(spec: &CorrelatedGaussianSpec) -> Result<f64> {
    let (m1, m2, theta) = two_entries(spec)?;
    if theta == 0.0 {
        return Ok(m1.max(m2));
    }
    let z = (m1 - m2) / theta;
    Ok(m2 + (m1 - m2) * std_normal_cdf(z) + theta * std_normal_pdf(z))
}

pub fn expected_min2_equal_means(mu: f64, theta: f64) -> f64 {
    debug_assert!(theta >= 0.0);
    mu - theta / SQRT_2PI
}

pub fn expected_max2_equal_means(mu: f64, theta: f64) -> f64 {
    debug_assert!(theta >= 0.0);
    mu + theta / SQRT_2PI
}

/// `E[max(N1, N2, N3)]` when all three pairwise deviations equal `theta`.
pub fn expected_max3_equal_means(mu: f64, theta: f64) -> f64 {
    debug_assert!(theta >= 0.0);
    mu + 1.5 * theta / SQRT_2PI
}

/// `E[min(max(N1, N2), N3)]`, the triplet-critic target error, with equal means and deviations.
///
/// Obtained from `min(max(a,b),c) + max(a,b,c) = max(a,b) + c`.
pub fn expected_tcu_error(mu: f64, theta: f64) -> f64 {
    debug_assert!(theta >= 0.0);
    // written as 0.5 * theta so that it is bit-identical to expected_weighted_error(0.5, ..)
    mu - 0.5 * theta / SQRT_2PI
}

/// Expected error of `beta * min(N1, N2) + (1 - beta) * average` (WD3 and TADD targets).
pub fn expected_weighted_error(beta: f64, mu: f64, theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::domain(format!("beta must lie in [0, 1], got {beta}")));
    }
    Ok(mu - beta * theta / SQRT_2PI)
}

/// Target rules whose expected error is tabulated by [`rule_reports`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticRule {
    Ddpg,
    ClippedDouble,
    Wd3,
    Tadd,
    Tcd3,
    Swt,
}

impl AnalyticRule {
    pub const ALL: [AnalyticRule; 6] = [
        AnalyticRule::Ddpg,
        AnalyticRule::ClippedDouble,
        AnalyticRule::Wd3,
        AnalyticRule::Tadd,
        AnalyticRule::Tcd3,
        AnalyticRule::Swt,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AnalyticRule::Ddpg => "ddpg",
            AnalyticRule::ClippedDouble => "td3",
            AnalyticRule::Wd3 => "wd3",
            AnalyticRule::Tadd => "tadd",
            AnalyticRule::Tcd3 => "tcd3",
            AnalyticRule::Swt => "swtd3",
        }
    }

    /// Equal-means expected error at a fixed mixing weight.
    pub fn expected_error(self, beta: f64, mu: f64, theta: f64) -> Result<f64> {
        Ok(match self {
            AnalyticRule::Ddpg => mu,
            AnalyticRule::ClippedDouble => expected_min2_equal_means(mu, theta),
            AnalyticRule::Tcd3 => expected_tcu_error(mu, theta),
            AnalyticRule::Wd3 | AnalyticRule::Tadd | AnalyticRule::Swt => {
                expected_weighted_error(beta, mu, theta)?
            }
        })
    }

    /// Monte Carlo statistic whose mean is this rule's target error.
    pub fn statistic(self, beta: f64) -> OrderStatistic {
        match self {
            AnalyticRule::Ddpg => OrderStatistic::First,
            AnalyticRule::ClippedDouble => OrderStatistic::Min2,
            AnalyticRule::Wd3 => OrderStatistic::Wd3Target { beta },
            AnalyticRule::Tadd => OrderStatistic::TaddTarget { beta },
            AnalyticRule::Tcd3 => OrderStatistic::MinMax,
            AnalyticRule::Swt => OrderStatistic::SwtTarget { beta },
        }
    }
}

/// Expected errors of every rule at `(beta, mu, theta)`.
pub fn rule_reports(beta: f64, mu: f64, theta: f64) -> Result<Vec<BiasReport>> {
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(Error::domain(format!("theta must be nonnegative, got {theta}")));
    }
    AnalyticRule::ALL
        .iter()
        .map(|rule| {
            Ok(BiasReport {
                rule_name: rule.label().to_string(),
                expected_error: rule.expected_error(beta, mu, theta)?,
                theta,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn theta_trivial_cases() {
        assert_eq!(theta_of(1.0, 1.0, 1.0).unwrap(), 0.0);
        assert!((theta_of(1.0, 1.0, 0.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn theta_rejects_bad_inputs() {
        assert!(theta_of(0.0, 1.0, 0.0).is_err());
        assert!(theta_of(1.0, -1.0, 0.0).is_err());
        assert!(theta_of(1.0, 1.0, 1.5).is_err());
        assert!(theta_of(1.0, 1.0, -1.01).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(CorrelatedGaussianSpec::new(vec![0.0], vec![1.0], 0.0).is_err());
        assert!(CorrelatedGaussianSpec::new(vec![0.0; 4], vec![1.0; 4], 0.0).is_err());
        assert!(CorrelatedGaussianSpec::new(vec![0.0; 2], vec![1.0; 3], 0.0).is_err());
        assert!(CorrelatedGaussianSpec::new(vec![0.0; 2], vec![1.0, 0.0], 0.0).is_err());
        assert!(CorrelatedGaussianSpec::new(vec![0.0; 2], vec![1.0; 2], 2.0).is_err());
    }

    #[test]
    fn normal_density_and_cdf() {
        assert!((std_normal_pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(std_normal_cdf(0.0), 0.5);
        // reference values of Phi
        assert!((std_normal_cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-12);
        assert!((std_normal_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-15);
    }

    #[test]
    fn cdf_matches_integrated_density() {
        // composite Simpson on [0, x], Phi(x) = 0.5 + integral
        let simpson = |x: f64| {
            let n = 2000;
            let h = x / n as f64;
            let mut s = std_normal_pdf(0.0) + std_normal_pdf(x);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * std_normal_pdf(i as f64 * h);
            }
            0.5 + s * h / 3.0
        };
        for x in [-2.5, -1.0, 0.3, 1.96, 4.0] {
            assert!((std_normal_cdf(x) - simpson(x)).abs() < 1e-10, "x = {x}");
        }
        assert!((std_normal_cdf(1.96) - 0.975).abs() < 5e-4);
    }

    #[test]
    fn degenerate_min_is_the_variable_itself() {
        let spec = CorrelatedGaussianSpec::new(vec![3.0, 3.0], vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(expected_min2(&spec).unwrap(), 3.0);
        assert_eq!(expected_max2(&spec).unwrap(), 3.0);
    }

    #[test]
    fn min2_needs_two_entries() {
        let spec = CorrelatedGaussianSpec::exchangeable3(0.0, 1.0, 0.0).unwrap();
        assert!(expected_min2(&spec).is_err());
    }

    #[test]
    fn equal_means_values() {
        assert_eq!(expected_min2_equal_means(0.0, 0.0), 0.0);
        let t = 2f64.sqrt();
        assert!((expected_min2_equal_means(1.0, t) - 0.435_810_416_452_243_7).abs() < 1e-12);
        assert!((expected_max2_equal_means(0.0, t) - 0.564_189_583_547_756_3).abs() < 1e-12);
        assert!((expected_max3_equal_means(0.0, t) - 0.846_284_375_321_634_4).abs() < 1e-12);
        assert!((expected_max3_equal_means(2.0, 1.0) - 2.598_413_420_602_149).abs() < 1e-12);
        assert!((expected_tcu_error(0.0, t) + 0.282_094_791_773_878_14).abs() < 1e-12);
        assert_eq!(expected_tcu_error(0.0, 0.0), 0.0);
    }

    #[test]
    fn weighted_error_anchors() {
        let t = 2f64.sqrt();
        assert_eq!(expected_weighted_error(0.0, 0.7, t).unwrap(), 0.7);
        assert_eq!(
            expected_weighted_error(1.0, 0.0, t).unwrap(),
            expected_min2_equal_means(0.0, t)
        );
        assert_eq!(expected_weighted_error(0.5, 0.0, t).unwrap(), expected_tcu_error(0.0, t));
        assert!(expected_weighted_error(1.1, 0.0, t).is_err());
        assert!(expected_weighted_error(-0.1, 0.0, t).is_err());
    }

    #[test]
    fn weighted_error_monotone_in_beta() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        for w in grid.windows(2) {
            let a = expected_weighted_error(w[0], 0.3, 1.2).unwrap();
            let b = expected_weighted_error(w[1], 0.3, 1.2).unwrap();
            assert!(b < a);
            assert_eq!(
                expected_weighted_error(w[0], 0.3, 0.0).unwrap(),
                expected_weighted_error(w[1], 0.3, 0.0).unwrap()
            );
        }
    }

    #[test]
    fn ordering_against_tcu_flips_at_half() {
        for theta in [0.1, 1.0, 2f64.sqrt(), 5.0] {
            let tcu = expected_tcu_error(0.0, theta).abs();
            for i in 0..=20 {
                let beta = i as f64 / 20.0;
                let eps = expected_weighted_error(beta, 0.0, theta).unwrap().abs();
                if beta < 0.5 {
                    assert!(eps < tcu, "beta {beta}");
                } else {
                    assert!(eps >= tcu, "beta {beta}");
                }
            }
        }
    }

    #[test]
    fn reports_cover_every_rule() {
        let reports = rule_reports(1.0, 0.0, 1.0).unwrap();
        assert_eq!(reports.len(), 6);
        let get = |name: &str| reports.iter().find(|r| r.rule_name == name).unwrap().expected_error;
        assert_eq!(get("wd3"), get("td3"));
        assert_eq!(get("wd3"), get("tadd"));
        assert!(rule_reports(0.5, 0.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn min2_specialises_to_equal_means(mu in -50.0..50.0f64, s1 in 0.01..10.0f64, s2 in 0.01..10.0f64, rho in -1.0..1.0f64) {
            let spec = CorrelatedGaussianSpec::new(vec![mu, mu], vec![s1, s2], rho).unwrap();
            let theta = spec.theta(0, 1);
            let general = expected_min2(&spec).unwrap();
            prop_assert!((general - expected_min2_equal_means(mu, theta)).abs() <= 1e-12 * (1.0 + mu.abs()));
        }

        #[test]
        fn order_statistic_bounds(m1 in -20.0..20.0f64, m2 in -20.0..20.0f64, s1 in 0.01..5.0f64, s2 in 0.01..5.0f64, rho in -1.0..=1.0f64) {
            let spec = CorrelatedGaussianSpec::new(vec![m1, m2], vec![s1, s2], rho).unwrap();
            prop_assert!(expected_min2(&spec).unwrap() <= m1.min(m2) + 1e-12);
            prop_assert!(expected_max2(&spec).unwrap() >= m1.max(m2) - 1e-12);
            let theta = spec.theta(0, 1);
            prop_assert!(expected_max2_equal_means(m1, theta) >= m1);
        }

        #[test]
        fn min_plus_max_is_twice_the_mean(mu in -50.0..50.0f64, theta in 0.0..10.0f64) {
            let sum = expected_max2_equal_means(mu, theta) + expected_min2_equal_means(mu, theta);
            prop_assert!((sum - 2.0 * mu).abs() < 1e-12 * (1.0 + mu.abs()));
        }

        #[test]
        fn tcu_is_average_of_min_and_mean(mu in -50.0..50.0f64, theta in 0.0..10.0f64) {
            let lhs = expected_tcu_error(mu, theta);
            let rhs = (expected_min2_equal_means(mu, theta) + mu) / 2.0;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + mu.abs()));
        }

        #[test]
        fn underestimation_condition(mu in 0.01..5.0f64, rho in -1.0..0.99f64, excess in 1.0001..5.0f64) {
            // sigma above sqrt(pi / (1 - rho)) * mu forces E[min] < 0
            let sigma = (std::f64::consts::PI / (1.0 - rho)).sqrt() * mu * excess;
            let theta = theta_of(sigma, sigma, rho).unwrap();
            prop_assert!(theta > mu * SQRT_2PI);
            prop_assert!(expected_min2_equal_means(mu, theta) < 0.0);
        }

        #[test]
        fn negative_min_iff_theta_large(mu in 0.01..5.0f64, theta in 0.0..20.0f64) {
            let negative = expected_min2_equal_means(mu, theta) < 0.0;
            prop_assert_eq!(negative, theta > mu * SQRT_2PI);
        }
    }
}
