//! Moment calculus for censored Gaussian variables.
//!
//! A low-quality reading carries `f * 1(f >= T)`, so its moments are the
//! truncated moments of a Gaussian. With `alpha = (T - mu) / sigma`:
//!
//! ```text
//! m0 = P(f >= T)              = Q(alpha)
//! m1 = E[f 1(f >= T)]         = mu Q(alpha) + sigma phi(alpha)
//! m2 = E[f^2 1(f >= T)]       = (mu^2 + sigma^2) Q(alpha) + sigma (mu + T) phi(alpha)
//! ```
//!
//! `m1` follows from `integral_alpha^inf z phi(z) dz = phi(alpha)` and `m2` from
//! `integral_alpha^inf z^2 phi(z) dz = alpha phi(alpha) + Q(alpha)`.
//!
//! A threshold of `f64::NEG_INFINITY` means "never censored" and
//! `f64::INFINITY` means "never active". Both go through the same functions.
//!
//! For a pair, `E[f1 f2 1(f2 >= T2)]` is closed form through the linear
//! conditional mean of `f1` given `f2`; the doubly censored cross moment and
//! the orthant probability go through [`Quadrature`] (see [`quad`]) with a
//! dedicated series ([`bvn`]) for `|rho| > 0.99`.

pub mod bvn;
pub mod mc;
pub mod quad;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use crate::error::{Error, Result};
pub use mc::{mc_oracle, McEstimate, MomentQuery};
use quad::Inner;
pub use quad::{GaussLegendre, Quadrature};

/// Correlation above which [`bvn_upper`] switches to the series.
pub const BVN_SERIES_RHO: f64 = 0.99;

pub fn std_pdf(z: f64) -> f64 {
    if z.is_infinite() {
        return 0.0;
    }
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Phi(z)
pub fn std_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Q(z) = 1 - Phi(z), computed without cancellation.
pub fn std_q(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Univariate normal `N(mu, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gauss1 {
    pub mu: f64,
    pub sigma: f64,
}

impl Gauss1 {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        let g = Self { mu, sigma };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Gauss1 needs finite mu and sigma >= 0, got ({}, {})",
                self.mu, self.sigma
            )));
        }
        Ok(())
    }
}

/// Bivariate normal with marginals `N(mu1, sigma1^2)`, `N(mu2, sigma2^2)` and
/// correlation `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gauss2 {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl Gauss2 {
    pub fn new(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64, rho: f64) -> Result<Self> {
        let g = Self {
            mu1,
            mu2,
            sigma1,
            sigma2,
            rho,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn standard(rho: f64) -> Self {
        Self {
            mu1: 0.0,
            mu2: 0.0,
            sigma1: 1.0,
            sigma2: 1.0,
            rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.first().validate()?;
        self.second().validate()?;
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rho must lie in [-1, 1], got {}",
                self.rho
            )));
        }
        Ok(())
    }

    pub fn first(&self) -> Gauss1 {
        Gauss1 {
            mu: self.mu1,
            sigma: self.sigma1,
        }
    }

    pub fn second(&self) -> Gauss1 {
        Gauss1 {
            mu: self.mu2,
            sigma: self.sigma2,
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            mu1: self.mu2,
            mu2: self.mu1,
            sigma1: self.sigma2,
            sigma2: self.sigma1,
            rho: self.rho,
        }
    }

    pub fn covariance(&self) -> f64 {
        self.rho * self.sigma1 * self.sigma2
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// `P(f >= T)`
pub fn trunc_m0(g: &Gauss1, t: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        return 1.0;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    if g.sigma == 0.0 {
        return indicator(g.mu >= t);
    }
    std_q((t - g.mu) / g.sigma)
}

/// `E[f 1(f >= T)]`
pub fn trunc_m1(g: &Gauss1, t: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        return g.mu;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    if g.sigma == 0.0 {
        return g.mu * indicator(g.mu >= t);
    }
    let a = (t - g.mu) / g.sigma;
    g.mu * std_q(a) + g.sigma * std_pdf(a)
}

/// `E[f^2 1(f >= T)]`
pub fn trunc_m2(g: &Gauss1, t: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        return g.mu * g.mu + g.sigma * g.sigma;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    if g.sigma == 0.0 {
        return g.mu * g.mu * indicator(g.mu >= t);
    }
    let a = (t - g.mu) / g.sigma;
    let pdf = std_pdf(a);
    let tail = if pdf == 0.0 {
        0.0
    } else {
        g.sigma * (g.mu + t) * pdf
    };
    ((g.mu * g.mu + g.sigma * g.sigma) * std_q(a) + tail).max(0.0)
}

fn default_quadrature() -> &'static Quadrature {
    static QUAD: OnceLock<Quadrature> = OnceLock::new();
    QUAD.get_or_init(Quadrature::default)
}

/// `P(f1 >= T1, f2 >= T2)`.
pub fn bvn_upper(g: &Gauss2, t1: f64, t2: f64) -> f64 {
    if t1 == f64::INFINITY || t2 == f64::INFINITY {
        return 0.0;
    }
    if t1 == f64::NEG_INFINITY {
        return trunc_m0(&g.second(), t2);
    }
    if t2 == f64::NEG_INFINITY {
        return trunc_m0(&g.first(), t1);
    }
    if g.sigma1 == 0.0 || g.sigma2 == 0.0 || g.rho == 0.0 {
        return trunc_m0(&g.first(), t1) * trunc_m0(&g.second(), t2);
    }
    if g.rho.abs() > BVN_SERIES_RHO {
        return bvn::bvn_upper_std((t1 - g.mu1) / g.sigma1, (t2 - g.mu2) / g.sigma2, g.rho);
    }
    default_quadrature()
        .integrate_unchecked(g, t1, t2, Inner::Prob)
        .clamp(0.0, 1.0)
}

/// `E[f1 f2 1(f2 >= T2)]`, closed form through
/// `E[f1 | f2] = (mu1 - b mu2) + b f2` with `b = rho sigma1 / sigma2`.
pub fn cond_linear_cross(g: &Gauss2, t2: f64) -> f64 {
    let f2 = g.second();
    let b = if g.sigma2 > 0.0 {
        g.rho * g.sigma1 / g.sigma2
    } else {
        0.0
    };
    if t2 == f64::NEG_INFINITY {
        return g.mu1 * g.mu2 + g.covariance();
    }
    (g.mu1 - b * g.mu2) * trunc_m1(&f2, t2) + b * trunc_m2(&f2, t2)
}

/// `E[f1 f2 1(f1 >= T1) 1(f2 >= T2)]`.
///
/// Reduces to closed forms when a threshold is absent, a marginal is
/// degenerate, or `rho = 0`; otherwise integrates with `quad`.
pub fn cens_cross_m11(g: &Gauss2, t1: f64, t2: f64, quad: &Quadrature) -> Result<f64> {
    if t1 == f64::INFINITY || t2 == f64::INFINITY {
        return Ok(0.0);
    }
    if t1 == f64::NEG_INFINITY {
        return Ok(cond_linear_cross(g, t2));
    }
    if t2 == f64::NEG_INFINITY {
        return Ok(cond_linear_cross(&g.swapped(), t1));
    }
    if g.sigma1 == 0.0 || g.sigma2 == 0.0 || g.rho == 0.0 {
        return Ok(trunc_m1(&g.first(), t1) * trunc_m1(&g.second(), t2));
    }
    quad.integrate(g, t1, t2, Inner::Cross)
}
