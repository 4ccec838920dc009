use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BETA0: f64 = 0.5;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Sampling interval `[lower, beta0]` for the stochastic critic weight.
///
/// `lower` starts at `beta0` and falls linearly to `alpha` over `horizon` advances:
/// after `t` advances it equals `beta0 - (beta0 - alpha) * t / horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    beta0: f64,
    lower: f64,
    alpha: f64,
    horizon: u64,
    t: u64,
}

impl BetaSchedule {
    pub fn new(beta0: f64, alpha: f64, horizon: u64) -> Result<Self> {
        if !(0.0 <= alpha && alpha <= beta0 && beta0 <= 1.0) {
            return Err(Error::Config(format!(
                "beta schedule needs 0 <= alpha <= beta0 <= 1, got alpha {alpha}, beta0 {beta0}"
            )));
        }
        Ok(Self {
            beta0,
            lower: beta0,
            alpha,
            horizon,
            t: 0,
        })
    }

    /// Interval starting at 0.5 and shrinking to 0.05 over `horizon` steps.
    pub fn standard(horizon: u64) -> Self {
        Self::new(DEFAULT_BETA0, DEFAULT_ALPHA, horizon).expect("default bounds are valid")
    }

    /// Degenerate schedule that always yields `beta`.
    pub fn constant(beta: f64) -> Result<Self> {
        Self::new(beta, beta, u64::MAX)
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn is_exhausted(&self) -> bool {
        self.t >= self.horizon
    }

    /// Uniform draw on `[lower, beta0]`. Exactly `beta0` while the interval is a point.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.lower + (self.beta0 - self.lower) * u
    }

    /// Move one step along the linear law.
    pub fn advance(&mut self) -> Result<()> {
        if self.is_exhausted() {
            return Err(Error::ScheduleExhausted(self.horizon));
        }
        self.t += 1;
        self.lower = if self.t == self.horizon {
            self.alpha
        } else {
            let span = self.beta0 - self.alpha;
            (self.beta0 - span * self.t as f64 / self.horizon as f64).max(self.alpha)
        };
        Ok(())
    }
}

/// Draw the mixing weight for one target computation.
pub fn swt_draw_beta<R: Rng + ?Sized>(schedule: &BetaSchedule, rng: &mut R) -> f64 {
    schedule.draw(rng)
}

pub fn swt_advance(schedule: &mut BetaSchedule) -> Result<()> {
    schedule.advance()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_draw_is_exactly_half() {
        let s = BetaSchedule::standard(1000);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(swt_draw_beta(&s, &mut rng), 0.5);
        }
    }

    #[test]
    fn first_advance_follows_linear_law() {
        let mut s = BetaSchedule::standard(10);
        swt_advance(&mut s).unwrap();
        assert!((s.lower() - 0.455).abs() < 1e-15);
        assert_eq!(s.t(), 1);
    }

    #[test]
    fn endpoint_and_midpoint() {
        let mut s = BetaSchedule::standard(10_000);
        for _ in 0..5_000 {
            s.advance().unwrap();
        }
        assert!((s.lower() - 0.275).abs() < 1e-12);
        for _ in 0..5_000 {
            s.advance().unwrap();
        }
        assert_eq!(s.lower(), 0.05);
        assert!(matches!(s.advance(), Err(Error::ScheduleExhausted(10_000))));
    }

    #[test]
    fn lower_stays_within_bounds() {
        let mut s = BetaSchedule::standard(37);
        while !s.is_exhausted() {
            s.advance().unwrap();
            assert!(s.lower() >= s.alpha() && s.lower() <= s.beta0());
            let want = 0.5 - 0.45 * s.t() as f64 / 37.0;
            assert!((s.lower() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn draws_cover_interval_with_uniform_mean() {
        let mut s = BetaSchedule::standard(2);
        s.advance().unwrap();
        s.advance().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| s.draw(&mut rng)).collect();
        assert!(draws.iter().all(|b| (0.05..=0.5).contains(b)));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let se = 0.45 / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 0.275).abs() < 4.0 * se);
    }

    #[test]
    fn draws_are_reproducible() {
        let mut s = BetaSchedule::standard(4);
        s.advance().unwrap();
        let a: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            (0..10).map(|_| s.draw(&mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            (0..10).map(|_| s.draw(&mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn constant_schedule() {
        let mut s = BetaSchedule::constant(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(s.draw(&mut rng), 1.0);
            s.advance().unwrap();
        }
        assert!(BetaSchedule::new(0.5, 0.6, 10).is_err());
        assert!(BetaSchedule::new(1.2, 0.1, 10).is_err());
    }
}
