//! Best affine estimator of the field at a query location and its MSE.
//!
//! For readings `Y` with mean `m = E[Y]`, covariance `C = Cov(Y, Y)` and
//! cross-covariance `c = Cov(f_*, Y)`, the affine map `a + B Y` minimizing
//! `E[(f_* - a - B Y)^2]` is
//!
//! ```text
//! f_hat = mu(x_*) + c^T C^{-1} (Y - m)
//! mse   = k(x_*, x_*) - c^T C^{-1} c
//! ```
//!
//! i.e. the intercept is `a = mu(x_*) - B m` with `B = c^T C^{-1}`. The formula
//! is the centered (covariance) form; with censored low quality readings the
//! moments come from [`crate::obs`]. `C^{-1}` is never formed: both terms use
//! the whitened vectors `L^{-1} c` and `L^{-1} (Y - m)` of a Cholesky factor
//! `C = L L^T` (jittered if needed).

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gp::{Location, Prior};
use crate::linalg::JitteredCholesky;
use crate::moments::mc::McEstimate;
use crate::moments::Quadrature;
use crate::obs::{query_cross, sensor_moments, MomentBundle, ObservationVector, SensorArray};
use crate::{par, rng};

/// Point estimate and predictive MSE at one location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub estimate: f64,
    pub mse: f64,
    pub query: Location,
}

/// Regular raster over a rectangle, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        if !ok(self.x_range) || !ok(self.y_range) {
            return Err(Error::InvalidArgument(format!("bad grid ranges {self:?}")));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidArgument("grid needs nx, ny >= 1".into()));
        }
        Ok(())
    }

    fn axis(range: (f64, f64), n: usize, i: usize) -> f64 {
        if n == 1 {
            0.5 * (range.0 + range.1)
        } else {
            range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64
        }
    }

    /// Cell centers in row-major order (`y` outer, `x` inner).
    pub fn points(&self) -> Vec<Location> {
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for iy in 0..self.ny {
            let y = Self::axis(self.y_range, self.ny, iy);
            for ix in 0..self.nx {
                out.push(Location::new(Self::axis(self.x_range, self.nx, ix), y));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Predictions on a [`GridSpec`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub grid: GridSpec,
    pub cells: Vec<Prediction>,
}

impl Raster {
    pub fn mean_mse(&self) -> f64 {
        self.cells.iter().map(|p| p.mse).sum::<f64>() / self.cells.len() as f64
    }
}

fn finish(
    query: Location,
    prior_mean: f64,
    prior_var: f64,
    factor: Option<&JitteredCholesky>,
    cross: &DVector<f64>,
    white_resid: &DVector<f64>,
) -> Prediction {
    let Some(factor) = factor else {
        return Prediction {
            estimate: prior_mean,
            mse: prior_var,
            query,
        };
    };
    let u = factor.whiten(cross);
    Prediction {
        estimate: prior_mean + u.dot(white_resid),
        mse: (prior_var - u.dot(&u)).max(0.0),
        query,
    }
}

fn check_len(expected: usize, obs: &ObservationVector) -> Result<()> {
    if obs.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: obs.len(),
        });
    }
    Ok(())
}

/// Estimate and MSE at the bundle's query location.
pub fn sblue_predict(
    bundle: &MomentBundle,
    obs: &ObservationVector,
    prior_mean_at_query: f64,
) -> Result<Prediction> {
    check_len(bundle.dim(), obs)?;
    if bundle.dim() == 0 {
        return Ok(finish(
            bundle.query,
            prior_mean_at_query,
            bundle.prior_var,
            None,
            &bundle.cross,
            &bundle.mean,
        ));
    }
    let factor = bundle.cov.factor()?;
    let white = factor.whiten(&(&obs.0 - &bundle.mean));
    Ok(finish(
        bundle.query,
        prior_mean_at_query,
        bundle.prior_var,
        Some(&factor),
        &bundle.cross,
        &white,
    ))
}

/// Predictive MSE only; it does not depend on the readings.
pub fn predictive_mse(bundle: &MomentBundle) -> Result<f64> {
    if bundle.dim() == 0 {
        return Ok(bundle.prior_var);
    }
    let factor = bundle.cov.factor()?;
    let u = factor.whiten(&bundle.cross);
    Ok((bundle.prior_var - u.dot(&u)).max(0.0))
}

/// Observation moments and their factorization for a fixed array. None of it
/// depends on the readings, so one model serves many reading vectors.
#[derive(Debug, Clone)]
pub struct ArrayModel {
    prior: Prior,
    arr: SensorArray,
    mean: DVector<f64>,
    factor: Option<JitteredCholesky>,
}

impl ArrayModel {
    pub fn new(prior: &Prior, arr: &SensorArray, quad: &Quadrature) -> Result<Self> {
        let moments = sensor_moments(prior, arr, quad)?;
        let factor = if arr.is_empty() {
            None
        } else {
            Some(moments.cov.factor()?)
        };
        Ok(Self {
            prior: *prior,
            arr: arr.clone(),
            mean: moments.mean,
            factor,
        })
    }

    pub fn array(&self) -> &SensorArray {
        &self.arr
    }

    /// Jitter added to the observation covariance (0 when none).
    pub fn jitter(&self) -> f64 {
        self.factor.as_ref().map_or(0.0, |f| f.jitter())
    }

    /// Predictive MSE at `query`.
    pub fn mse_at(&self, query: &Location) -> f64 {
        let var = self.prior.var_at(query);
        match &self.factor {
            None => var,
            Some(f) => {
                let u = f.whiten(&query_cross(&self.prior, &self.arr, &self.mean, query));
                (var - u.dot(&u)).max(0.0)
            }
        }
    }

    pub fn condition(&self, obs: &ObservationVector) -> Result<FittedField> {
        check_len(self.arr.len(), obs)?;
        let white_resid = match &self.factor {
            None => DVector::zeros(0),
            Some(f) => f.whiten(&(&obs.0 - &self.mean)),
        };
        Ok(FittedField {
            model: self.clone(),
            white_resid,
        })
    }
}

/// Estimator conditioned on a fixed array and reading vector; evaluates any
/// number of query locations against one factorization.
#[derive(Debug, Clone)]
pub struct FittedField {
    model: ArrayModel,
    white_resid: DVector<f64>,
}

impl FittedField {
    pub fn new(
        prior: &Prior,
        arr: &SensorArray,
        obs: &ObservationVector,
        quad: &Quadrature,
    ) -> Result<Self> {
        check_len(arr.len(), obs)?;
        ArrayModel::new(prior, arr, quad)?.condition(obs)
    }

    /// Jitter added to the observation covariance (0 when none).
    pub fn jitter(&self) -> f64 {
        self.model.jitter()
    }

    pub fn predict(&self, query: Location) -> Prediction {
        let m = &self.model;
        let cross = query_cross(&m.prior, &m.arr, &m.mean, &query);
        finish(
            query,
            m.prior.mean_at(&query),
            m.prior.var_at(&query),
            m.factor.as_ref(),
            &cross,
            &self.white_resid,
        )
    }

    pub fn predict_many(&self, queries: &[Location]) -> Vec<Prediction> {
        par::map_slice(queries, |q| self.predict(*q))
    }
}

/// Estimates over a grid, sharing one factorization across all cells.
pub fn sblue_grid(
    prior: &Prior,
    arr: &SensorArray,
    obs: &ObservationVector,
    grid: &GridSpec,
) -> Result<Raster> {
    grid.validate()?;
    let fitted = FittedField::new(prior, arr, obs, &Quadrature::default())?;
    Ok(Raster {
        grid: *grid,
        cells: fitted.predict_many(&grid.points()),
    })
}

/// Minimum effective sample size accepted by [`mmse_oracle`].
pub const MIN_ESS: f64 = 100.0;

/// Self-normalized importance-sampling estimate of `E[f_* | Y]`, with prior
/// draws as proposals and the reading likelihood as weights. Comparison
/// oracle only.
pub fn mmse_oracle(
    prior: &Prior,
    arr: &SensorArray,
    obs: &ObservationVector,
    query: Location,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    use crate::gp::FieldSampler;

    if n_samples < crate::moments::mc::MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "mmse_oracle needs at least {} samples, got {n_samples}",
            crate::moments::mc::MIN_SAMPLES
        )));
    }
    check_len(arr.len(), obs)?;
    if arr.sensors().iter().any(|s| s.noise_std == 0.0) {
        return Err(Error::DegenerateWeights { ess: 0.0 });
    }
    let mut locs = arr.locations();
    locs.push(query);
    let sampler = FieldSampler::new(prior, &locs)?;
    let n = arr.len();
    const SHARD: usize = 1 << 14;
    let shards = n_samples.div_ceil(SHARD);
    let parts = par::map_range(shards, |s| {
        let len = SHARD.min(n_samples - s * SHARD);
        let mut rng = rng::substream(seed, "sblue", "mmse_oracle", s as u64);
        (0..len)
            .map(|_| {
                let f = sampler.draw(&mut rng);
                let logw: f64 = arr
                    .sensors()
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let r = (obs.0[i] - s.signal(f[i])) / s.noise_std;
                        -0.5 * r * r
                    })
                    .sum();
                (logw, f[n])
            })
            .collect::<Vec<_>>()
    });
    let draws: Vec<(f64, f64)> = parts.into_iter().flatten().collect();
    let max = draws.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    let (mut sw, mut sw2, mut swf) = (0.0, 0.0, 0.0);
    for &(lw, f) in &draws {
        let w = (lw - max).exp();
        sw += w;
        sw2 += w * w;
        swf += w * f;
    }
    let ess = sw * sw / sw2;
    if !(ess >= MIN_ESS) {
        return Err(Error::DegenerateWeights {
            ess: if ess.is_nan() { 0.0 } else { ess },
        });
    }
    let est = swf / sw;
    let var: f64 = draws
        .iter()
        .map(|&(lw, f)| {
            let w = (lw - max).exp() / sw;
            w * w * (f - est) * (f - est)
        })
        .sum();
    Ok(McEstimate {
        estimate: est,
        std_error: var.sqrt(),
        n_samples,
    })
}
