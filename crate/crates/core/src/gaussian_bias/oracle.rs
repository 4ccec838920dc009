//! Monte Carlo estimates of order statistics of correlated Gaussians.
//!
//! Draws are produced by mixing independent standard normals through the
//! Cholesky factor of the (exchangeable) correlation matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::CorrelatedGaussianSpec;
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 10_000;

/// Scalar functions of a correlated Gaussian draw `(n1, n2[, n3])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OrderStatistic {
    /// `min(n1, n2)`
    Min2,
    /// `max(n1, n2)`
    Max2,
    /// `max(n1, n2, n3)`
    Max3,
    /// `min(max(n1, n2), n3)`
    MinMax,
    /// `n1`
    First,
    /// `beta * min(n1, n2) + (1 - beta) * (n1 + n2) / 2`
    Wd3Target { beta: f64 },
    /// `beta * min(n1, n2) + (1 - beta) * n3`
    TaddTarget { beta: f64 },
    /// `beta * min(n1, n2) + (1 - beta) * n1`
    SwtTarget { beta: f64 },
}

impl OrderStatistic {
    pub fn arity(self) -> usize {
        match self {
            OrderStatistic::Max3 | OrderStatistic::MinMax | OrderStatistic::TaddTarget { .. } => 3,
            _ => 2,
        }
    }

    #[inline]
    fn eval(self, x: &[f64; 3]) -> f64 {
        let (a, b, c) = (x[0], x[1], x[2]);
        match self {
            OrderStatistic::Min2 => a.min(b),
            OrderStatistic::Max2 => a.max(b),
            OrderStatistic::Max3 => a.max(b).max(c),
            OrderStatistic::MinMax => a.max(b).min(c),
            OrderStatistic::First => a,
            OrderStatistic::Wd3Target { beta } => beta * a.min(b) + (1.0 - beta) * 0.5 * (a + b),
            OrderStatistic::TaddTarget { beta } => beta * a.min(b) + (1.0 - beta) * c,
            OrderStatistic::SwtTarget { beta } => beta * a.min(b) + (1.0 - beta) * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
}

impl McEstimate {
    /// Distance from `value` in units of the standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        if self.standard_error == 0.0 {
            if self.mean == value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - value) / self.standard_error
        }
    }

    /// Whether `value` lies within `k` standard errors, with a small absolute
    /// slack for degenerate (zero-variance) statistics.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.standard_error + 1e-12 * (1.0 + value.abs())
    }
}

/// Lower-triangular factor of the `d x d` matrix with unit diagonal and `rho` elsewhere.
///
/// Zero pivots (singular but positive semidefinite matrices, e.g. `rho = 1`) are
/// accepted; a negative pivot means the matrix is not a valid correlation matrix.
#[allow(clippy::needless_range_loop)]
fn exchangeable_cholesky(d: usize, rho: f64) -> Result<[[f64; 3]; 3]> {
    const TOL: f64 = 1e-12;
    let corr = |i: usize, j: usize| if i == j { 1.0 } else { rho };
    let mut l = [[0.0; 3]; 3];
    for j in 0..d {
        let mut pivot = corr(j, j);
        for k in 0..j {
            pivot -= l[j][k] * l[j][k];
        }
        if pivot < -TOL {
            return Err(Error::domain(format!(
                "correlation {rho} is not positive semidefinite for {d} variables"
            )));
        }
        let diag = pivot.max(0.0).sqrt();
        l[j][j] = diag;
        for i in (j + 1)..d {
            let mut s = corr(i, j);
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = if diag > TOL { s / diag } else { 0.0 };
        }
    }
    Ok(l)
}

/// Estimate several statistics from one shared set of `n` draws.
pub fn mc_order_stats(
    spec: &CorrelatedGaussianSpec,
    statistics: &[OrderStatistic],
    n: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if n < MIN_SAMPLES {
        return Err(Error::domain(format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    let d = spec.len();
    if let Some(s) = statistics.iter().find(|s| s.arity() != d) {
        return Err(Error::domain(format!(
            "{s:?} needs {} variables but the spec has {d}",
            s.arity()
        )));
    }
    let l = exchangeable_cholesky(d, spec.rho())?;
    let mut mu = [0.0; 3];
    let mut sigma = [0.0; 3];
    mu[..d].copy_from_slice(spec.mu());
    sigma[..d].copy_from_slice(spec.sigma());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Welford accumulators
    let mut mean = vec![0.0; statistics.len()];
    let mut m2 = vec![0.0; statistics.len()];
    let mut z = [0.0; 3];
    let mut x = [0.0; 3];
    for count in 1..=n {
        for zi in z.iter_mut().take(d) {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let mut v = 0.0;
            for k in 0..=i {
                v += l[i][k] * z[k];
            }
            x[i] = mu[i] + sigma[i] * v;
        }
        let inv = 1.0 / count as f64;
        for (j, stat) in statistics.iter().enumerate() {
            let v = stat.eval(&x);
            let delta = v - mean[j];
            mean[j] += delta * inv;
            m2[j] += delta * (v - mean[j]);
        }
    }
    let nf = n as f64;
    Ok(mean
        .into_iter()
        .zip(m2)
        .map(|(mean, m2)| McEstimate {
            mean,
            standard_error: (m2 / (nf - 1.0) / nf).sqrt(),
        })
        .collect())
}

/// Sample mean and standard error of one statistic over `n` correlated draws.
pub fn mc_order_stat_oracle(
    spec: &CorrelatedGaussianSpec,
    statistic: OrderStatistic,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    Ok(mc_order_stats(spec, &[statistic], n, seed)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reproduces_correlation() {
        for &(d, rho) in &[(2, 0.3), (3, 0.7), (3, -0.4), (2, -1.0), (3, 1.0), (3, -0.5)] {
            let l = exchangeable_cholesky(d, rho).unwrap();
            for i in 0..d {
                for j in 0..d {
                    let v: f64 = (0..d).map(|k| l[i][k] * l[j][k]).sum();
                    let want = if i == j { 1.0 } else { rho };
                    assert!((v - want).abs() < 1e-12, "d={d} rho={rho} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn rejects_indefinite_three_way_correlation() {
        let spec = CorrelatedGaussianSpec::exchangeable3(0.0, 1.0, -0.8).unwrap();
        assert!(mc_order_stat_oracle(&spec, OrderStatistic::Max3, MIN_SAMPLES, 1).is_err());
    }

    #[test]
    fn rejects_small_n_and_arity_mismatch() {
        let two = CorrelatedGaussianSpec::equal_means2(0.0, [1.0, 1.0], 0.0).unwrap();
        assert!(mc_order_stat_oracle(&two, OrderStatistic::Min2, 100, 1).is_err());
        assert!(mc_order_stat_oracle(&two, OrderStatistic::Max3, MIN_SAMPLES, 1).is_err());
    }

    #[test]
    fn identical_variables_have_min_equal_to_variable() {
        let spec = CorrelatedGaussianSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], 1.0).unwrap();
        let est = mc_order_stat_oracle(&spec, OrderStatistic::Min2, 100_000, 3).unwrap();
        assert!(est.mean.abs() < 4.0 * est.standard_error);
        let first = mc_order_stat_oracle(&spec, OrderStatistic::First, 100_000, 3).unwrap();
        assert!((est.mean - first.mean).abs() < 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = CorrelatedGaussianSpec::exchangeable3(0.5, 1.2, 0.2).unwrap();
        let a = mc_order_stat_oracle(&spec, OrderStatistic::MinMax, MIN_SAMPLES, 11).unwrap();
        let b = mc_order_stat_oracle(&spec, OrderStatistic::MinMax, MIN_SAMPLES, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_deviation_of_difference_matches_theta() {
        // sample std of (X - Y) for sigma = (0.5, 1.5), rho = 0.3
        let spec = CorrelatedGaussianSpec::new(vec![0.0, 0.0], vec![0.5, 1.5], 0.3).unwrap();
        let l = exchangeable_cholesky(2, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let (mut s, mut ss) = (0.0, 0.0);
        for _ in 0..n {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            let x = 0.5 * l[0][0] * z0;
            let y = 1.5 * (l[1][0] * z0 + l[1][1] * z1);
            s += x - y;
            ss += (x - y) * (x - y);
        }
        let nf = n as f64;
        let var = (ss - s * s / nf) / (nf - 1.0);
        let sd = var.sqrt();
        // standard error of a sample standard deviation ~ sd / sqrt(2n)
        let se = sd / (2.0 * nf).sqrt();
        assert!((sd - spec.theta(0, 1)).abs() < 4.0 * se);
    }
}
