//! Quadrature for the bivariate censored moments.
//!
//! The pair is whitened by conditioning on the second coordinate: given
//! `z = (f2 - mu2) / sigma2`, `f1 | z ~ N(mu1 + rho sigma1 z, sigma1^2 (1 - rho^2))`.
//! The inner expectation over `f1` is then a closed-form truncated moment, and
//! the outer one is a smooth 1-D integral over the truncated half-line
//! `z >= (T2 - mu2) / sigma2`, cut at `|z| = 9`. That integral is done with
//! composite Gauss-Legendre panels whose breakpoints bracket the point where
//! the conditional mean crosses `T1` (the only place the inner moment bends
//! sharply, and where it has a kink when `|rho| = 1`).

use std::f64::consts::PI;

use super::{std_pdf, trunc_m0, trunc_m1, Gauss1, Gauss2};
use crate::error::{Error, Result};

/// Half-width of the integration window in standard units; the Gaussian mass
/// outside is below 1e-18.
const Z_MAX: f64 = 9.0;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_n`, weights `2 / ((1 - x^2) P_n'(x)^2)`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp;
            loop {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 1..=n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
                }
                dp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z_prev = z;
                z = z_prev - p1 / dp;
                if (z - z_prev).abs() <= 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    fn integrate_panels<F: Fn(f64) -> f64>(&self, breaks: &[f64], f: &F) -> f64 {
        breaks
            .windows(2)
            .map(|w| self.integrate(w[0], w[1], f))
            .sum()
    }
}

/// Quadrature settings for the bivariate moments. The result at
/// `nodes_per_axis` is checked against the result at twice as many nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    nodes_per_axis: usize,
    abs_tol: f64,
    coarse: GaussLegendre,
    fine: GaussLegendre,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::new(40, 1e-8).expect("default quadrature is valid")
    }
}

impl Quadrature {
    pub const MIN_NODES: usize = 8;

    pub fn new(nodes_per_axis: usize, abs_tol: f64) -> Result<Self> {
        if nodes_per_axis < Self::MIN_NODES {
            return Err(Error::InvalidArgument(format!(
                "nodes_per_axis must be >= {}, got {nodes_per_axis}",
                Self::MIN_NODES
            )));
        }
        if !(abs_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "abs_tol must be positive, got {abs_tol}"
            )));
        }
        Ok(Self {
            nodes_per_axis,
            abs_tol,
            coarse: GaussLegendre::new(nodes_per_axis),
            fine: GaussLegendre::new(2 * nodes_per_axis),
        })
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }

    /// Checked integral: fails when the node-doubling difference exceeds
    /// `abs_tol * max(1, |value|)`.
    pub(crate) fn integrate(&self, g: &Gauss2, t1: f64, t2: f64, inner: Inner) -> Result<f64> {
        let (coarse, fine) = self.both(g, t1, t2, inner);
        let diff = (coarse - fine).abs();
        let tol = self.abs_tol * fine.abs().max(1.0);
        if diff > tol {
            return Err(Error::QuadratureNotConverged { diff, tol });
        }
        Ok(fine)
    }

    /// Fine-rule value without the convergence check.
    pub(crate) fn integrate_unchecked(&self, g: &Gauss2, t1: f64, t2: f64, inner: Inner) -> f64 {
        let breaks = breakpoints(g, t1, t2);
        conditional_integral(g, t1, &breaks, inner, &self.fine)
    }

    fn both(&self, g: &Gauss2, t1: f64, t2: f64, inner: Inner) -> (f64, f64) {
        let breaks = breakpoints(g, t1, t2);
        (
            conditional_integral(g, t1, &breaks, inner, &self.coarse),
            conditional_integral(g, t1, &breaks, inner, &self.fine),
        )
    }
}

/// Inner functional of `f1` given `f2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Inner {
    /// `P(f1 >= T1 | f2)`
    Prob,
    /// `f2 * E[f1 1(f1 >= T1) | f2]`
    Cross,
}

fn conditional(g: &Gauss2) -> (f64, f64) {
    let rho = g.rho.clamp(-1.0, 1.0);
    let slope = rho * g.sigma1;
    let sd = g.sigma1 * (1.0 - rho * rho).max(0.0).sqrt();
    (slope, sd)
}

fn breakpoints(g: &Gauss2, t1: f64, t2: f64) -> Vec<f64> {
    let lo = if t2 == f64::NEG_INFINITY {
        -Z_MAX
    } else {
        ((t2 - g.mu2) / g.sigma2).max(-Z_MAX)
    };
    let hi = Z_MAX;
    if !(lo < hi) {
        return Vec::new();
    }
    let (slope, sd) = conditional(g);
    let mut pts = vec![lo, hi, -3.0, 3.0];
    if slope != 0.0 && t1.is_finite() {
        let zk = (t1 - g.mu1) / slope;
        let width = sd / slope.abs();
        pts.push(zk);
        if width > 0.0 {
            pts.push(zk - 8.0 * width);
            pts.push(zk + 8.0 * width);
            pts.push(zk - 2.0 * width);
            pts.push(zk + 2.0 * width);
        }
    }
    pts.retain(|p| p.is_finite() && *p >= lo && *p <= hi);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

fn conditional_integral(
    g: &Gauss2,
    t1: f64,
    breaks: &[f64],
    inner: Inner,
    rule: &GaussLegendre,
) -> f64 {
    if breaks.len() < 2 {
        return 0.0;
    }
    let (slope, sd) = conditional(g);
    let f = |z: f64| {
        let cond = Gauss1 {
            mu: g.mu1 + slope * z,
            sigma: sd,
        };
        let v = match inner {
            Inner::Prob => trunc_m0(&cond, t1),
            Inner::Cross => (g.mu2 + g.sigma2 * z) * trunc_m1(&cond, t1),
        };
        v * std_pdf(z)
    };
    rule.integrate_panels(breaks, &f)
}
