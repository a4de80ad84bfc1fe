//! Gaussian-process prior over the planar field.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::JitteredCholesky;
use crate::rng::{self, StreamRng};

/// A point in the monitored region, in abstract planar units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist2(&self, other: &Location) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanSpec {
    Zero,
    Constant(f64),
}

impl MeanSpec {
    pub fn eval(&self, _loc: &Location) -> f64 {
        match *self {
            MeanSpec::Zero => 0.0,
            MeanSpec::Constant(c) => c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MeanSpec::Constant(c) if !c.is_finite() => Err(Error::InvalidArgument(format!(
                "constant mean must be finite, got {c}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    SquaredExponential,
}

/// Stationary covariance function `k(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub signal_variance: f64,
    pub lengthscale: f64,
}

impl KernelSpec {
    pub fn squared_exponential(signal_variance: f64, lengthscale: f64) -> Self {
        Self {
            family: KernelFamily::SquaredExponential,
            signal_variance,
            lengthscale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "signal_variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lengthscale must be positive, got {}",
                self.lengthscale
            )));
        }
        Ok(())
    }

    /// `k(a, b) = s^2 exp(-|a-b|^2 / (2 l^2))`. Symmetric bit-for-bit because
    /// the squared distance is.
    pub fn eval(&self, a: &Location, b: &Location) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => {
                let l2 = self.lengthscale * self.lengthscale;
                self.signal_variance * (-0.5 * a.dist2(b) / l2).exp()
            }
        }
    }
}

pub fn eval_mean(spec: &MeanSpec, loc: &Location) -> f64 {
    spec.eval(loc)
}

pub fn eval_kernel(spec: &KernelSpec, a: &Location, b: &Location) -> f64 {
    spec.eval(a, b)
}

/// Known GP prior: mean function plus covariance function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior {
    pub mean: MeanSpec,
    pub kernel: KernelSpec,
}

impl Prior {
    pub fn new(mean: MeanSpec, kernel: KernelSpec) -> Self {
        Self { mean, kernel }
    }

    pub fn validate(&self) -> Result<()> {
        self.mean.validate()?;
        self.kernel.validate()
    }

    pub fn mean_at(&self, loc: &Location) -> f64 {
        self.mean.eval(loc)
    }

    pub fn cov(&self, a: &Location, b: &Location) -> f64 {
        self.kernel.eval(a, b)
    }

    pub fn var_at(&self, loc: &Location) -> f64 {
        self.kernel.eval(loc, loc)
    }
}

/// Symmetric covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix(pub DMatrix<f64>);

impl CovMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn max_diag(&self) -> f64 {
        self.0.diagonal().iter().cloned().fold(0.0, f64::max)
    }

    /// Factorizes with the jitter ladder of [`JitteredCholesky`].
    pub fn factor(&self) -> Result<JitteredCholesky> {
        JitteredCholesky::new(&self.0)
    }

    /// Principal sub-matrix on `idx`.
    pub fn select(&self, idx: &[usize]) -> CovMatrix {
        let n = idx.len();
        CovMatrix(DMatrix::from_fn(n, n, |i, j| self.0[(idx[i], idx[j])]))
    }
}

/// Index pairs `(i, j)`, `i < j`, of exactly coincident locations.
pub fn duplicate_pairs(locs: &[Location]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..locs.len() {
        for j in (i + 1)..locs.len() {
            if locs[i] == locs[j] {
                out.push((i, j));
            }
        }
    }
    out
}

/// Gram matrix of the kernel over `locs`. Coincident locations make it rank
/// deficient; that is reported as a warning and left to the jitter ladder.
pub fn gram(spec: &KernelSpec, locs: &[Location]) -> CovMatrix {
    let dups = duplicate_pairs(locs);
    if !dups.is_empty() {
        log::warn!(
            "gram: {} duplicate location pair(s), first {:?}; matrix is rank deficient",
            dups.len(),
            dups[0]
        );
    }
    let n = locs.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = spec.eval(&locs[i], &locs[i]);
        for j in 0..i {
            let v = spec.eval(&locs[i], &locs[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    CovMatrix(m)
}

/// Reusable joint sampler of the field at a fixed set of locations.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    mean: DVector<f64>,
    factor: JitteredCholesky,
}

impl FieldSampler {
    pub fn new(prior: &Prior, locs: &[Location]) -> Result<Self> {
        let mean = DVector::from_iterator(locs.len(), locs.iter().map(|l| prior.mean_at(l)));
        let factor = gram(&prior.kernel, locs).factor()?;
        Ok(Self { mean, factor })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn jitter(&self) -> f64 {
        self.factor.jitter()
    }

    pub fn draw(&self, rng: &mut StreamRng) -> DVector<f64> {
        let n = self.mean.len();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        &self.mean + self.factor.colour(&z)
    }
}

/// One draw of `f ~ N(mu, K)` at `locs`, reproducible from `seed`.
pub fn sample_field(prior: &Prior, locs: &[Location], seed: u64) -> Result<DVector<f64>> {
    let sampler = FieldSampler::new(prior, locs)?;
    let mut rng = rng::stream(seed, "gp", "sample_field");
    Ok(sampler.draw(&mut rng))
}
