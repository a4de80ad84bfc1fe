//! Monte-Carlo oracle for the moment engine.
//!
//! Samples are split into fixed-size shards, each with its own stream, and
//! the per-shard mean/variance pairs are merged in shard order. The estimate
//! therefore does not depend on how many threads evaluated the shards.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Gauss1, Gauss2};
use crate::error::{Error, Result};
use crate::{par, rng};

pub const MIN_SAMPLES: usize = 10_000;
const SHARD: usize = 1 << 16;

/// Expectation to estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentQuery {
    /// `P(f >= t)`
    M0 { g: Gauss1, t: f64 },
    /// `E[f 1(f >= t)]`
    M1 { g: Gauss1, t: f64 },
    /// `E[f^2 1(f >= t)]`
    M2 { g: Gauss1, t: f64 },
    /// `P(f1 >= t1, f2 >= t2)`
    Bvn { g: Gauss2, t1: f64, t2: f64 },
    /// `E[f1 f2 1(f1 >= t1) 1(f2 >= t2)]`
    M11 { g: Gauss2, t1: f64, t2: f64 },
    /// `E[f1 f2 1(f2 >= t2)]`
    Cross { g: Gauss2, t2: f64 },
}

impl MomentQuery {
    fn validate(&self) -> Result<()> {
        match self {
            MomentQuery::M0 { g, .. } | MomentQuery::M1 { g, .. } | MomentQuery::M2 { g, .. } => {
                g.validate()
            }
            MomentQuery::Bvn { g, .. }
            | MomentQuery::M11 { g, .. }
            | MomentQuery::Cross { g, .. } => g.validate(),
        }
    }

    fn sample(&self, rng: &mut rng::StreamRng) -> f64 {
        let step = |f: f64, t: f64| if f >= t { 1.0 } else { 0.0 };
        let pair = |g: &Gauss2, rng: &mut rng::StreamRng| {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let w = (1.0 - g.rho * g.rho).max(0.0).sqrt();
            (
                g.mu1 + g.sigma1 * z1,
                g.mu2 + g.sigma2 * (g.rho * z1 + w * z2),
            )
        };
        match self {
            MomentQuery::M0 { g, t } => {
                let f = g.mu + g.sigma * rng.sample::<f64, _>(StandardNormal);
                step(f, *t)
            }
            MomentQuery::M1 { g, t } => {
                let f = g.mu + g.sigma * rng.sample::<f64, _>(StandardNormal);
                f * step(f, *t)
            }
            MomentQuery::M2 { g, t } => {
                let f = g.mu + g.sigma * rng.sample::<f64, _>(StandardNormal);
                f * f * step(f, *t)
            }
            MomentQuery::Bvn { g, t1, t2 } => {
                let (f1, f2) = pair(g, rng);
                step(f1, *t1) * step(f2, *t2)
            }
            MomentQuery::M11 { g, t1, t2 } => {
                let (f1, f2) = pair(g, rng);
                f1 * f2 * step(f1, *t1) * step(f2, *t2)
            }
            MomentQuery::Cross { g, t2 } => {
                let (f1, f2) = pair(g, rng);
                f1 * f2 * step(f2, *t2)
            }
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl McEstimate {
    /// `|value - estimate|` in units of standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (value - self.estimate).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Running mean/M2 accumulator (Welford), mergeable with Chan's update.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub n: f64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0.0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n / n;
        self.m2 += other.m2 + d * d * self.n * other.n / n;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n > 1.0 {
            self.m2 / (self.n - 1.0)
        } else {
            0.0
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n).sqrt()
    }
}

/// Unbiased Monte-Carlo estimate of `query`, reproducible from `seed`.
pub fn mc_oracle(query: &MomentQuery, n_samples: usize, seed: u64) -> Result<McEstimate> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "mc_oracle needs at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    query.validate()?;
    let shards = n_samples.div_ceil(SHARD);
    let parts = par::map_range(shards, |s| {
        let len = SHARD.min(n_samples - s * SHARD);
        let mut rng = rng::substream(seed, "moments", "mc_oracle", s as u64);
        let mut acc = Moments::default();
        for _ in 0..len {
            acc.push(query.sample(&mut rng));
        }
        acc
    });
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    Ok(McEstimate {
        estimate: total.mean,
        std_error: total.std_error(),
        n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::*;

    #[test]
    fn rejects_small_sample() {
        let q = MomentQuery::M0 {
            g: Gauss1 {
                mu: 0.0,
                sigma: 1.0,
            },
            t: 0.0,
        };
        assert!(mc_oracle(&q, 100, 1).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let q = MomentQuery::M1 {
            g: Gauss1 {
                mu: 1.0,
                sigma: 2.0,
            },
            t: 0.5,
        };
        assert_eq!(
            mc_oracle(&q, 100_000, 3).unwrap(),
            mc_oracle(&q, 100_000, 3).unwrap()
        );
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..333].iter().for_each(|&x| a.push(x));
        xs[333..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - whole.mean).abs() < 1e-12);
        assert!((a.variance() - whole.variance()).abs() < 1e-10);
    }

    #[test]
    fn shifted_half_normal_mean() {
        // mu = 1, sigma = 2, T = 0.5 against 1e7 draws
        let g = Gauss1 {
            mu: 1.0,
            sigma: 2.0,
        };
        let mc = mc_oracle(&MomentQuery::M1 { g, t: 0.5 }, 10_000_000, 17).unwrap();
        let exact = trunc_m1(&g, 0.5);
        assert!(mc.z_score(exact) < 3.0, "{exact} vs {mc:?}");
    }

    #[test]
    fn orthant_half_correlation() {
        let mc = mc_oracle(
            &MomentQuery::Bvn {
                g: Gauss2::standard(0.5),
                t1: 0.0,
                t2: 0.0,
            },
            1_000_000,
            5,
        )
        .unwrap();
        assert!(mc.z_score(1.0 / 3.0) < 4.0);
    }

    #[test]
    fn correlated_cross_moment() {
        let g = Gauss2::new(0.2, -0.1, 1.0, 1.5, 0.7).unwrap();
        let mc = mc_oracle(
            &MomentQuery::M11 {
                g,
                t1: 0.0,
                t2: 0.0,
            },
            10_000_000,
            23,
        )
        .unwrap();
        let v = cens_cross_m11(&g, 0.0, 0.0, &Quadrature::default()).unwrap();
        assert!(mc.z_score(v) < 3.0, "{v} vs {mc:?}");
    }
}
