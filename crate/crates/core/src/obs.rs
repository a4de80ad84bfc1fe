//! Heterogeneous sensor network: registry, forward simulation and the moment
//! bundle consumed by the estimator.
//!
//! High quality sensors report `y = f(x) + w`. Low quality sensors report
//! `y = f(x) + v` when `f(x) >= T` and `y = v` otherwise; the fusion center
//! does not know which regime produced a reading, so `y = f 1(f >= T) + v`
//! and its moments are censored-Gaussian moments. Additive noise contributes
//! its variance in both regimes and nothing to the mean.
//!
//! Sensors are kept in canonical order: all high quality sensors, then all
//! low quality ones, each group sorted by id.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gp::{CovMatrix, FieldSampler, Location, Prior};
use crate::moments::{
    cens_cross_m11, cond_linear_cross, trunc_m1, trunc_m2, Gauss1, Gauss2, Quadrature,
};
use crate::par;
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Network {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub id: String,
    pub loc: Location,
    pub network: Network,
    /// Noise standard deviation (sigma_W for high, sigma_V for low sensors).
    pub noise_std: f64,
    /// Activation threshold; `None` for high quality sensors. A low sensor may
    /// carry `-inf` (always active) or `+inf` (never active).
    pub threshold: Option<f64>,
    pub cost: f64,
}

impl Sensor {
    pub fn high(id: impl Into<String>, loc: Location, noise_std: f64, cost: f64) -> Self {
        Self {
            id: id.into(),
            loc,
            network: Network::High,
            noise_std,
            threshold: None,
            cost,
        }
    }

    pub fn low(
        id: impl Into<String>,
        loc: Location,
        noise_std: f64,
        threshold: f64,
        cost: f64,
    ) -> Self {
        Self {
            id: id.into(),
            loc,
            network: Network::Low,
            noise_std,
            threshold: Some(threshold),
            cost,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| {
            Err(Error::InvalidArgument(format!(
                "sensor {:?}: {msg}",
                self.id
            )))
        };
        if !self.loc.is_finite() {
            return bad("location must be finite".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if !(self.cost >= 0.0 && self.cost.is_finite()) {
            return bad(format!("cost must be >= 0, got {}", self.cost));
        }
        match (self.network, self.threshold) {
            (Network::High, Some(_)) => bad("high quality sensors have no threshold".into()),
            (Network::Low, None) => bad("low quality sensors need a threshold".into()),
            (Network::Low, Some(t)) if t.is_nan() => bad("threshold is NaN".into()),
            _ => Ok(()),
        }
    }

    /// Threshold seen by the moment engine: `-inf` for uncensored sensors.
    pub fn censor_threshold(&self) -> f64 {
        self.threshold.unwrap_or(f64::NEG_INFINITY)
    }

    /// Noise-free part of the reading for a field value.
    pub fn signal(&self, f: f64) -> f64 {
        if f >= self.censor_threshold() {
            f
        } else {
            0.0
        }
    }
}

/// Validated sensors in canonical order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensorArray {
    sensors: Vec<Sensor>,
    n_high: usize,
}

impl SensorArray {
    pub fn new(mut sensors: Vec<Sensor>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &sensors {
            s.validate()?;
            if !seen.insert(s.id.clone()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        sensors.sort_by(|a, b| (a.network, &a.id).cmp(&(b.network, &b.id)));
        let n_high = sensors
            .iter()
            .filter(|s| s.network == Network::High)
            .count();
        Ok(Self { sensors, n_high })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn n_high(&self) -> usize {
        self.n_high
    }

    pub fn n_low(&self) -> usize {
        self.sensors.len() - self.n_high
    }

    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    pub fn get(&self, i: usize) -> &Sensor {
        &self.sensors[i]
    }

    pub fn locations(&self) -> Vec<Location> {
        self.sensors.iter().map(|s| s.loc).collect()
    }

    /// Sub-array of the given canonical indices (order is preserved, since a
    /// subsequence of a canonical list is canonical).
    pub fn subset(&self, idx: &[usize]) -> SensorArray {
        let sensors: Vec<Sensor> = idx.iter().map(|&i| self.sensors[i].clone()).collect();
        let n_high = sensors
            .iter()
            .filter(|s| s.network == Network::High)
            .count();
        SensorArray { sensors, n_high }
    }
}

/// Readings aligned with a [`SensorArray`].
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVector(pub DVector<f64>);

impl ObservationVector {
    pub fn new(readings: Vec<f64>) -> Result<Self> {
        if let Some(v) = readings.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite reading {v}")));
        }
        Ok(Self(DVector::from_vec(readings)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> ObservationVector {
        ObservationVector(DVector::from_iterator(
            idx.len(),
            idx.iter().map(|&i| self.0[i]),
        ))
    }
}

/// One simulated realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDraw {
    /// Field at the sensor locations.
    pub field: DVector<f64>,
    /// Field at the extra locations passed to [`ObservationSimulator::new`].
    pub extra: DVector<f64>,
    pub obs: ObservationVector,
}

/// Repeated forward simulation with a single factorization of the joint
/// covariance of sensor and extra locations.
#[derive(Debug, Clone)]
pub struct ObservationSimulator {
    sensors: Vec<Sensor>,
    sampler: FieldSampler,
}

impl ObservationSimulator {
    pub fn new(prior: &Prior, arr: &SensorArray, extra: &[Location]) -> Result<Self> {
        let mut locs = arr.locations();
        locs.extend_from_slice(extra);
        Ok(Self {
            sensors: arr.sensors().to_vec(),
            sampler: FieldSampler::new(prior, &locs)?,
        })
    }

    pub fn draw(&self, rng: &mut StreamRng) -> SimulatedDraw {
        let n = self.sensors.len();
        let all = self.sampler.draw(rng);
        let field = all.rows(0, n).into_owned();
        let extra = all.rows(n, all.len() - n).into_owned();
        let obs = DVector::from_iterator(
            n,
            self.sensors.iter().zip(field.iter()).map(|(s, &f)| {
                let noise: f64 = rng.sample(StandardNormal);
                s.signal(f) + s.noise_std * noise
            }),
        );
        SimulatedDraw {
            field,
            extra,
            obs: ObservationVector(obs),
        }
    }
}

/// Field values at the sensors and the readings they produce.
pub fn simulate_observations(
    prior: &Prior,
    arr: &SensorArray,
    seed: u64,
) -> Result<(DVector<f64>, ObservationVector)> {
    let sim = ObservationSimulator::new(prior, arr, &[])?;
    let mut rng = rng::stream(seed, "obs", "simulate");
    let d = sim.draw(&mut rng);
    Ok((d.field, d.obs))
}

/// Query-independent moments of the observation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorMoments {
    pub mean: DVector<f64>,
    pub cov: CovMatrix,
}

/// Everything the affine estimator needs for one query location.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentBundle {
    pub query: Location,
    /// `E[Y]`
    pub mean: DVector<f64>,
    /// `Cov(Y, Y)`
    pub cov: CovMatrix,
    /// `Cov(f_*, Y)`
    pub cross: DVector<f64>,
    /// `mu(x_*)`
    pub prior_mean: f64,
    /// `k(x_*, x_*)`
    pub prior_var: f64,
}

impl MomentBundle {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Bundle of the sub-array on `idx`. Moments are pointwise, so this is
    /// exactly the bundle that the sub-array would produce.
    pub fn select(&self, idx: &[usize]) -> MomentBundle {
        MomentBundle {
            query: self.query,
            mean: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i])),
            cov: self.cov.select(idx),
            cross: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.cross[i])),
            prior_mean: self.prior_mean,
            prior_var: self.prior_var,
        }
    }
}

fn marginal(prior: &Prior, loc: &Location) -> Gauss1 {
    Gauss1 {
        mu: prior.mean_at(loc),
        sigma: prior.var_at(loc).sqrt(),
    }
}

fn pair(prior: &Prior, a: &Location, b: &Location) -> Gauss2 {
    let (ga, gb) = (marginal(prior, a), marginal(prior, b));
    let denom = ga.sigma * gb.sigma;
    let rho = if denom > 0.0 {
        (prior.cov(a, b) / denom).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Gauss2 {
        mu1: ga.mu,
        mu2: gb.mu,
        sigma1: ga.sigma,
        sigma2: gb.sigma,
        rho,
    }
}

/// `E[y_i]`
pub fn sensor_mean(prior: &Prior, s: &Sensor) -> f64 {
    trunc_m1(&marginal(prior, &s.loc), s.censor_threshold())
}

/// `E[Y]` and `Cov(Y, Y)`. Rows are assembled in parallel and written back in
/// index order.
pub fn sensor_moments(
    prior: &Prior,
    arr: &SensorArray,
    quad: &Quadrature,
) -> Result<SensorMoments> {
    let sensors = arr.sensors();
    let n = sensors.len();
    let mean = DVector::from_iterator(n, sensors.iter().map(|s| sensor_mean(prior, s)));
    let rows = par::map_range(n, |i| -> Result<Vec<f64>> {
        let si = &sensors[i];
        let ti = si.censor_threshold();
        let mut row = Vec::with_capacity(i + 1);
        for (j, sj) in sensors.iter().enumerate().take(i) {
            let tj = sj.censor_threshold();
            let c = if ti == f64::NEG_INFINITY && tj == f64::NEG_INFINITY {
                prior.cov(&si.loc, &sj.loc)
            } else {
                let g = pair(prior, &si.loc, &sj.loc);
                cens_cross_m11(&g, ti, tj, quad)? - mean[i] * mean[j]
            };
            row.push(c);
        }
        let g = marginal(prior, &si.loc);
        let var = if ti == f64::NEG_INFINITY {
            g.sigma * g.sigma
        } else {
            (trunc_m2(&g, ti) - mean[i] * mean[i]).max(0.0)
        };
        row.push(var + si.noise_std * si.noise_std);
        Ok(row)
    });
    let rows = par::collect_results(rows)?;
    let mut cov = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(SensorMoments {
        mean,
        cov: CovMatrix(cov),
    })
}

/// `Cov(f_*, y_i)` for one sensor, given `E[y_i]`.
pub fn query_cross_one(prior: &Prior, s: &Sensor, sensor_mean: f64, query: &Location) -> f64 {
    let t = s.censor_threshold();
    if t == f64::NEG_INFINITY {
        return prior.cov(query, &s.loc);
    }
    let g = pair(prior, query, &s.loc);
    cond_linear_cross(&g, t) - g.mu1 * sensor_mean
}

/// `Cov(f_*, Y)`.
pub fn query_cross(
    prior: &Prior,
    arr: &SensorArray,
    mean: &DVector<f64>,
    query: &Location,
) -> DVector<f64> {
    DVector::from_iterator(
        arr.len(),
        arr.sensors()
            .iter()
            .zip(mean.iter())
            .map(|(s, &m)| query_cross_one(prior, s, m, query)),
    )
}

pub fn moment_bundle_with(
    prior: &Prior,
    arr: &SensorArray,
    query: Location,
    quad: &Quadrature,
) -> Result<MomentBundle> {
    let SensorMoments { mean, cov } = sensor_moments(prior, arr, quad)?;
    let cross = query_cross(prior, arr, &mean, &query);
    Ok(MomentBundle {
        query,
        mean,
        cov,
        cross,
        prior_mean: prior.mean_at(&query),
        prior_var: prior.var_at(&query),
    })
}

/// Moment bundle with the default quadrature.
pub fn moment_bundle(prior: &Prior, arr: &SensorArray, query: Location) -> Result<MomentBundle> {
    moment_bundle_with(prior, arr, query, &Quadrature::default())
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Region {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Self { x, y }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 < r.1;
        if ok(self.x) && ok(self.y) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "empty or non-finite region {self:?}"
            )))
        }
    }

    fn sample(&self, rng: &mut StreamRng) -> Location {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        Location::new(
            self.x.0 + u * (self.x.1 - self.x.0),
            self.y.0 + v * (self.y.1 - self.y.0),
        )
    }
}

/// Uniformly scattered sensors. High and low locations come from separate
/// streams, so for a fixed seed a smaller layout is a prefix of a larger one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticLayout {
    pub n_high: usize,
    pub n_low: usize,
    pub region: Region,
    pub noise_high: f64,
    pub noise_low: f64,
    pub threshold: f64,
    pub cost_high: f64,
    pub cost_low: f64,
}

impl SyntheticLayout {
    pub fn generate(&self, seed: u64) -> Result<SensorArray> {
        self.region.validate()?;
        let mut hr = rng::stream(seed, "obs", "layout-high");
        let mut lr = rng::stream(seed, "obs", "layout-low");
        let mut sensors = Vec::with_capacity(self.n_high + self.n_low);
        for i in 0..self.n_high {
            let loc = self.region.sample(&mut hr);
            sensors.push(Sensor::high(
                format!("H{i:04}"),
                loc,
                self.noise_high,
                self.cost_high,
            ));
        }
        for i in 0..self.n_low {
            let loc = self.region.sample(&mut lr);
            sensors.push(Sensor::low(
                format!("L{i:04}"),
                loc,
                self.noise_low,
                self.threshold,
                self.cost_low,
            ));
        }
        SensorArray::new(sensors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{KernelSpec, MeanSpec};
    use crate::moments::trunc_m1;

    fn prior() -> Prior {
        Prior::new(MeanSpec::Zero, KernelSpec::squared_exponential(5.8, 3.0))
    }

    #[test]
    fn canonical_order_and_counts() {
        let arr = SensorArray::new(vec![
            Sensor::low("b", Location::new(0.0, 0.0), 0.1, 0.0, 30.0),
            Sensor::high("z", Location::new(1.0, 0.0), 0.1, 150.0),
            Sensor::low("a", Location::new(2.0, 0.0), 0.1, 0.0, 30.0),
            Sensor::high("c", Location::new(3.0, 0.0), 0.1, 150.0),
        ])
        .unwrap();
        let ids: Vec<_> = arr.sensors().iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["c", "z", "a", "b"]);
        assert_eq!((arr.n_high(), arr.n_low(), arr.len()), (2, 2, 4));
    }

    #[test]
    fn invalid_sensors_rejected() {
        let mut s = Sensor::high("h", Location::new(0.0, 0.0), 0.1, 1.0);
        s.threshold = Some(0.0);
        assert!(SensorArray::new(vec![s]).is_err());
        let mut s = Sensor::low("l", Location::new(0.0, 0.0), 0.1, 0.0, 1.0);
        s.threshold = None;
        assert!(SensorArray::new(vec![s]).is_err());
        let s = Sensor::high("h", Location::new(0.0, 0.0), -0.1, 1.0);
        assert!(SensorArray::new(vec![s]).is_err());
        let dup = vec![
            Sensor::high("h", Location::new(0.0, 0.0), 0.1, 1.0),
            Sensor::low("h", Location::new(1.0, 0.0), 0.1, 0.0, 1.0),
        ];
        assert_eq!(SensorArray::new(dup), Err(Error::DuplicateId("h".into())));
    }

    #[test]
    fn noiseless_uncensored_observations_equal_field() {
        let arr = SensorArray::new(vec![
            Sensor::high("h", Location::new(0.0, 0.0), 0.0, 1.0),
            Sensor::low("l", Location::new(2.0, 1.0), 0.0, f64::NEG_INFINITY, 1.0),
        ])
        .unwrap();
        let (f, y) = simulate_observations(&prior(), &arr, 4).unwrap();
        assert_eq!(f, y.0);
    }

    #[test]
    fn never_active_sensor_reads_noise() {
        let arr = SensorArray::new(vec![Sensor::low(
            "l",
            Location::new(0.0, 0.0),
            1.0,
            f64::INFINITY,
            1.0,
        )])
        .unwrap();
        let sim = ObservationSimulator::new(&prior(), &arr, &[]).unwrap();
        let mut rng = rng::stream(1, "test", "never");
        let n = 100_000;
        let mean = (0..n).map(|_| sim.draw(&mut rng).obs.0[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn censored_reading_mean() {
        let arr = SensorArray::new(vec![Sensor::low(
            "l",
            Location::new(0.0, 0.0),
            0.5,
            0.0,
            1.0,
        )])
        .unwrap();
        let sim = ObservationSimulator::new(&prior(), &arr, &[]).unwrap();
        let mut rng = rng::stream(2, "test", "censored");
        let n = 1_000_000;
        let mut acc = crate::moments::mc::Moments::default();
        for _ in 0..n {
            acc.push(sim.draw(&mut rng).obs.0[0]);
        }
        let exact = trunc_m1(
            &Gauss1 {
                mu: 0.0,
                sigma: 5.8f64.sqrt(),
            },
            0.0,
        );
        assert!(
            (acc.mean - exact).abs() < 3.0 * acc.std_error(),
            "{} vs {exact}",
            acc.mean
        );
    }

    #[test]
    fn all_high_bundle_is_gp_moments() {
        let p = Prior::new(
            MeanSpec::Constant(1.5),
            KernelSpec::squared_exponential(2.0, 1.0),
        );
        let arr = SensorArray::new(vec![
            Sensor::high("a", Location::new(0.0, 0.0), 0.3, 1.0),
            Sensor::high("b", Location::new(0.5, 0.8), 0.2, 1.0),
        ])
        .unwrap();
        let q = Location::new(0.2, 0.1);
        let b = moment_bundle(&p, &arr, q).unwrap();
        let locs = arr.locations();
        for i in 0..2 {
            assert_eq!(b.mean[i], 1.5);
            assert_eq!(b.cross[i], p.cov(&q, &locs[i]));
            for j in 0..2 {
                let noise = if i == j {
                    arr.get(i).noise_std.powi(2)
                } else {
                    0.0
                };
                assert!((b.cov.0[(i, j)] - p.cov(&locs[i], &locs[j]) - noise).abs() < 1e-15);
            }
        }
        assert_eq!(b.prior_var, 2.0);
    }

    #[test]
    fn uncensored_low_matches_high() {
        let p = prior();
        let locs = [
            Location::new(0.0, 0.0),
            Location::new(1.0, 2.0),
            Location::new(-1.0, 0.5),
        ];
        let high = SensorArray::new(
            locs.iter()
                .enumerate()
                .map(|(i, &l)| Sensor::high(format!("s{i}"), l, 0.4, 1.0))
                .collect(),
        )
        .unwrap();
        let low = SensorArray::new(
            locs.iter()
                .enumerate()
                .map(|(i, &l)| Sensor::low(format!("s{i}"), l, 0.4, f64::NEG_INFINITY, 1.0))
                .collect(),
        )
        .unwrap();
        let q = Location::new(0.3, 0.3);
        assert_eq!(
            moment_bundle(&p, &high, q).unwrap(),
            moment_bundle(&p, &low, q).unwrap()
        );
    }

    #[test]
    fn synthetic_layout_is_nested() {
        let layout = SyntheticLayout {
            n_high: 3,
            n_low: 4,
            region: Region::new((0.0, 10.0), (0.0, 10.0)),
            noise_high: 0.1,
            noise_low: 0.2,
            threshold: 0.0,
            cost_high: 150.0,
            cost_low: 30.0,
        };
        let small = layout.generate(5).unwrap();
        let big = SyntheticLayout {
            n_high: 6,
            n_low: 8,
            ..layout
        }
        .generate(5)
        .unwrap();
        assert_eq!(small.n_high(), 3);
        assert_eq!(small.get(0), big.get(0));
        assert_eq!(small.get(2), big.get(2));
        assert_eq!(small.get(3), big.get(6));
    }
}
