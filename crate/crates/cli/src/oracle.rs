//! Reduced verification suite behind the `oracle` subcommand: closed forms
//! against Monte Carlo, S-BLUE against plain GP regression, predictive MSE
//! against simulation, and CEM against enumeration.

use fieldsense_core::gp::{KernelSpec, Location, MeanSpec, Prior};
use fieldsense_core::moments::mc::{mc_oracle, MomentQuery};
use fieldsense_core::moments::{
    bvn_upper, cens_cross_m11, cond_linear_cross, trunc_m0, trunc_m1, trunc_m2,
};
use fieldsense_core::obs::{moment_bundle, ObservationSimulator, Region, SyntheticLayout};
use fieldsense_core::rng;
use fieldsense_core::sblue::{predictive_mse, sblue_predict};
use fieldsense_core::selection::{cem_select_with, CemConfig, MseTable, SelectionEvaluator};
use fieldsense_core::{
    Gauss1, Gauss2, ObservationVector, Quadrature, SelectionProblem, Sensor, SensorArray,
};
use rand::Rng;

use crate::error::{CliError, Result};
use crate::experiments::same_utility;
use crate::output::{csv_bytes, summary_bytes, OutputSet, Stamp};
use crate::run::Report;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub case: String,
    pub value: f64,
    pub reference: f64,
    /// `|z|` for Monte Carlo checks, absolute difference otherwise.
    pub statistic: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.statistic <= self.tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    pub moment_sets: usize,
    pub mc_samples: usize,
    pub gp_cases: usize,
    pub mse_draws: usize,
    pub cem_instances: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            moment_sets: 20,
            mc_samples: 200_000,
            gp_cases: 10,
            mse_draws: 20_000,
            cem_instances: 5,
        }
    }
}

/// `P(|Z| > 4)` for a standard normal.
const TWO_SIDED_4SD: f64 = 6.334e-5;

/// `p_nonzero` is the closed-form chance that one sample is nonzero. When
/// every sample is zero the standard error is degenerate, so the check
/// scores the exact probability of an all-zero run instead.
fn mc_check(
    case: String,
    value: f64,
    p_nonzero: f64,
    q: MomentQuery,
    n: usize,
    seed: u64,
) -> Result<Check> {
    let est = mc_oracle(&q, n, seed)?;
    let statistic = if est.std_error > 0.0 {
        ((value - est.estimate) / est.std_error).abs()
    } else if est.estimate == 0.0 && p_nonzero < 1.0 {
        if ((-p_nonzero).ln_1p() * n as f64).exp() >= TWO_SIDED_4SD {
            0.0
        } else {
            f64::INFINITY
        }
    } else if (value - est.estimate).abs() <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(Check {
        suite: "moments",
        case,
        value,
        reference: est.estimate,
        statistic,
        tolerance: 4.0,
    })
}

pub fn moment_checks(seed: u64, s: &OracleSettings) -> Result<Vec<Check>> {
    let mut rng = rng::stream(seed, "oracle", "moment-params");
    let quad = Quadrature::default();
    let mut out = Vec::new();
    for i in 0..s.moment_sets {
        let g = Gauss2::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(0.2..3.0),
            rng.random_range(0.2..3.0),
            rng.random_range(-0.95..0.95),
        )?;
        let (t1, t2) = (rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5));
        let g1: Gauss1 = g.first();
        let sub = |k: u64| rng::derive_seed(seed, "oracle", "moment-mc", i as u64 * 8 + k);
        let n = s.mc_samples;
        let tag = |q: &str| format!("set{i}:{q}");
        let p1 = trunc_m0(&g1, t1);
        let p12 = bvn_upper(&g, t1, t2);
        let p2 = trunc_m0(&g.second(), t2);
        out.push(mc_check(
            tag("m0"),
            p1,
            p1,
            MomentQuery::M0 { g: g1, t: t1 },
            n,
            sub(0),
        )?);
        out.push(mc_check(
            tag("m1"),
            trunc_m1(&g1, t1),
            p1,
            MomentQuery::M1 { g: g1, t: t1 },
            n,
            sub(1),
        )?);
        out.push(mc_check(
            tag("m2"),
            trunc_m2(&g1, t1),
            p1,
            MomentQuery::M2 { g: g1, t: t1 },
            n,
            sub(2),
        )?);
        out.push(mc_check(
            tag("bvn"),
            p12,
            p12,
            MomentQuery::Bvn { g, t1, t2 },
            n,
            sub(3),
        )?);
        let m11 = cens_cross_m11(&g, t1, t2, &quad)?;
        out.push(mc_check(
            tag("m11"),
            m11,
            p12,
            MomentQuery::M11 { g, t1, t2 },
            n,
            sub(4),
        )?);
        out.push(mc_check(
            tag("cross"),
            cond_linear_cross(&g, t2),
            p2,
            MomentQuery::Cross { g, t2 },
            n,
            sub(5),
        )?);
    }
    Ok(out)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn se(a: &Location, b: &Location, var: f64, ell: f64) -> f64 {
    let d2 = (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
    var * (-d2 / (2.0 * ell * ell)).exp()
}

/// All-high arrays reduce to GP regression; the reference is a direct solve
/// of the noisy kernel system.
pub fn gp_checks(seed: u64, s: &OracleSettings) -> Result<Vec<Check>> {
    let mut rng = rng::stream(seed, "oracle", "gp");
    let mut out = Vec::new();
    for i in 0..s.gp_cases {
        let n = rng.random_range(1..=12usize);
        let var = rng.random_range(0.5..6.0);
        let ell = rng.random_range(1.0..5.0);
        let mean = rng.random_range(-1.0..1.0);
        let prior = Prior::new(
            MeanSpec::Constant(mean),
            KernelSpec::squared_exponential(var, ell),
        );
        let sensors: Vec<Sensor> = (0..n)
            .map(|j| {
                let loc = Location::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
                Sensor::high(format!("s{j:02}"), loc, rng.random_range(0.1..0.5), 1.0)
            })
            .collect();
        let arr = SensorArray::new(sensors)?;
        let q = Location::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
        let y: Vec<f64> = (0..n).map(|_| mean + rng.random_range(-2.0..2.0)).collect();

        let ss = arr.sensors();
        let a: Vec<Vec<f64>> = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        se(&ss[r].loc, &ss[c].loc, var, ell)
                            + if r == c { ss[r].noise_std.powi(2) } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let k: Vec<f64> = ss.iter().map(|sn| se(&sn.loc, &q, var, ell)).collect();
        let alpha = gauss_solve(a.clone(), y.iter().map(|v| v - mean).collect());
        let beta = gauss_solve(a, k.clone());
        let ref_mean = mean + k.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>();
        let ref_var = var - k.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();

        let bundle = moment_bundle(&prior, &arr, q)?;
        let pred = sblue_predict(&bundle, &ObservationVector::new(y)?, prior.mean_at(&q))?;
        for (what, v, r) in [
            ("estimate", pred.estimate, ref_mean),
            ("mse", pred.mse, ref_var),
        ] {
            out.push(Check {
                suite: "gp-reduction",
                case: format!("case{i}:n{n}:{what}"),
                value: v,
                reference: r,
                statistic: (v - r).abs(),
                tolerance: 1e-8,
            });
        }
    }
    Ok(out)
}

fn mixed_layout(n_high: usize, n_low: usize) -> SyntheticLayout {
    SyntheticLayout {
        n_high,
        n_low,
        region: Region::new((0.0, 100.0), (0.0, 100.0)),
        noise_high: 0.001,
        noise_low: 0.003,
        threshold: 0.0,
        cost_high: 150.0,
        cost_low: 30.0,
    }
}

fn oracle_prior() -> Prior {
    Prior::new(MeanSpec::Zero, KernelSpec::squared_exponential(5.8, 40.0))
}

/// Squared error of the estimator on simulated fields against the
/// predictive MSE it reports.
pub fn mse_checks(seed: u64, s: &OracleSettings) -> Result<Vec<Check>> {
    let prior = oracle_prior();
    let arr = mixed_layout(5, 10).generate(seed)?;
    let q = Location::new(10.0, 50.0);
    let bundle = moment_bundle(&prior, &arr, q)?;
    let predicted = predictive_mse(&bundle)?;
    let sim = ObservationSimulator::new(&prior, &arr, &[q])?;
    let mut rng = rng::stream(seed, "oracle", "mse");
    let mut acc = fieldsense_core::moments::mc::Moments::default();
    for _ in 0..s.mse_draws {
        let d = sim.draw(&mut rng);
        let p = sblue_predict(&bundle, &d.obs, prior.mean_at(&q))?;
        acc.push((p.estimate - d.extra[0]).powi(2));
    }
    Ok(vec![Check {
        suite: "empirical-mse",
        case: format!("mixed:h5:l10:draws{}", s.mse_draws),
        value: predicted,
        reference: acc.mean,
        statistic: ((predicted - acc.mean) / acc.std_error()).abs(),
        tolerance: 4.0,
    }])
}

/// CEM with default settings against enumeration on small mixed arrays.
pub fn cem_checks(seed: u64, s: &OracleSettings) -> Result<Vec<Check>> {
    let prior = oracle_prior();
    let qos_values = [3.4, 3.6, 3.8, 4.0, 4.2, 4.4];
    let (mut feasible, mut hits) = (0usize, 0usize);
    for i in 0..s.cem_instances {
        let arr = mixed_layout(5, 10).generate(rng::derive_seed(
            seed,
            "oracle",
            "cem-layout",
            i as u64,
        ))?;
        let problem = SelectionProblem {
            query: Location::new(10.0, 50.0),
            qos_var: qos_values[0],
            arr,
            prior,
        };
        let base = SelectionEvaluator::new(&problem)?;
        let table = MseTable::build(&base)?;
        for (qi, &qos) in qos_values.iter().enumerate() {
            let (_, opt) = table.optimum(qos);
            if !opt.is_finite() {
                continue;
            }
            feasible += 1;
            let cfg = CemConfig {
                seed: rng::derive_seed(seed, "oracle", "cem", (i * qos_values.len() + qi) as u64),
                ..CemConfig::default()
            };
            let got = cem_select_with(&base.with_qos(qos), &cfg)?;
            if same_utility(got.state.best_utility, opt) {
                hits += 1;
            }
        }
    }
    let rate = if feasible == 0 {
        1.0
    } else {
        hits as f64 / feasible as f64
    };
    Ok(vec![Check {
        suite: "cem-vs-optimal",
        case: format!("hits{hits}:of{feasible}"),
        value: rate,
        reference: 1.0,
        statistic: 1.0 - rate,
        tolerance: 0.1,
    }])
}

pub fn run_oracle(stamp: &Stamp, seed: u64, s: &OracleSettings) -> Result<Report> {
    let mut checks = moment_checks(seed, s)?;
    checks.extend(gp_checks(seed, s)?);
    checks.extend(mse_checks(seed, s)?);
    checks.extend(cem_checks(seed, s)?);

    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.suite.to_string(),
                c.case.clone(),
                c.value.to_string(),
                c.reference.to_string(),
                c.statistic.to_string(),
                c.tolerance.to_string(),
                u8::from(c.pass()).to_string(),
            ]
        })
        .collect();
    let mut files = OutputSet::new();
    files.add(
        "oracle.csv",
        csv_bytes(
            stamp,
            &[
                "suite",
                "case",
                "value",
                "reference",
                "statistic",
                "tolerance",
                "pass",
            ],
            &rows,
        ),
    );
    let mut summary = Vec::new();
    for suite in ["moments", "gp-reduction", "empirical-mse", "cem-vs-optimal"] {
        let g: Vec<&Check> = checks.iter().filter(|c| c.suite == suite).collect();
        let passed = g.iter().filter(|c| c.pass()).count();
        log::info!("oracle {suite}: {passed}/{} passed", g.len());
        summary.push((suite, format!("{passed}/{}", g.len())));
    }
    files.add("summary.csv", summary_bytes(stamp, &summary));
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.pass()).collect();
    let failure = (!failed.is_empty()).then(|| {
        CliError::Check(format!(
            "{} oracle check(s) failed, first: {} {}",
            failed.len(),
            failed[0].suite,
            failed[0].case
        ))
    });
    Ok(Report { files, failure })
}
