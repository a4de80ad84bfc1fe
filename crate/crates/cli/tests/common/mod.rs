//! Test-only reference code. GP regression and the forward simulator here
//! share nothing with the crate under test.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use fieldsense_core::{Location, Network, SensorArray};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn se_kernel(a: &Location, b: &Location, var: f64, ell: f64) -> f64 {
    let d2 = (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
    var * (-0.5 * d2 / (ell * ell)).exp()
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                assert!(d > 0.0, "matrix not positive definite at pivot {i}: {d}");
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Solves `(L L^T) x = b`.
pub fn chol_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

/// Posterior mean and variance of plain GP regression with independent
/// Gaussian noise.
pub fn gp_posterior(
    locs: &[Location],
    noise: &[f64],
    y: &[f64],
    mean: f64,
    var: f64,
    ell: f64,
    q: &Location,
) -> (f64, f64) {
    let n = locs.len();
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    se_kernel(&locs[i], &locs[j], var, ell)
                        + if i == j { noise[i] * noise[i] } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let k: Vec<f64> = locs.iter().map(|l| se_kernel(l, q, var, ell)).collect();
    let l = cholesky(&a);
    let resid: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let alpha = chol_solve(&l, &resid);
    let beta = chol_solve(&l, &k);
    let m = mean + k.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>();
    let v = var - k.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();
    (m, v)
}

/// Draws the latent field at the sensors and at `q`, then the readings.
pub struct RefSimulator {
    chol: Vec<Vec<f64>>,
    mean: f64,
    arr: SensorArray,
    rng: ChaCha8Rng,
}

impl RefSimulator {
    pub fn new(arr: &SensorArray, q: &Location, mean: f64, var: f64, ell: f64, seed: u64) -> Self {
        let mut locs = arr.locations();
        locs.push(*q);
        let n = locs.len();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| se_kernel(&locs[i], &locs[j], var, ell))
                    .collect()
            })
            .collect();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += 1e-9 * var;
        }
        Self {
            chol: cholesky(&a),
            mean,
            arr: arr.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Returns (readings, field at q).
    pub fn draw(&mut self) -> (Vec<f64>, f64) {
        let n = self.chol.len();
        let z: Vec<f64> = (0..n)
            .map(|_| StandardNormal.sample(&mut self.rng))
            .collect();
        let f: Vec<f64> = (0..n)
            .map(|i| self.mean + (0..=i).map(|k| self.chol[i][k] * z[k]).sum::<f64>())
            .collect();
        let y = self
            .arr
            .sensors()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let e: f64 = StandardNormal.sample(&mut self.rng);
                let signal = match s.network {
                    Network::High => f[i],
                    Network::Low => {
                        if f[i] >= s.censor_threshold() {
                            f[i]
                        } else {
                            0.0
                        }
                    }
                };
                signal + s.noise_std * e
            })
            .collect();
        (y, f[n - 1])
    }
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fieldsense")
}

pub fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Runs the binary and returns its exit code.
pub fn run_cli(args: &[&str], threads: Option<usize>) -> i32 {
    let mut cmd = Command::new(bin());
    cmd.args(args).env("RUST_LOG", "warn");
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t.to_string());
    }
    let out = cmd.output().expect("spawn fieldsense");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out.status.code().unwrap_or(-1)
}

/// All files of a directory, sorted by name.
pub fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}
