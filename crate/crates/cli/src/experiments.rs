//! Named desk experiments. Both write tidy long-format CSVs.

use fieldsense_core::obs::ObservationSimulator;
use fieldsense_core::rng;
use fieldsense_core::sblue::ArrayModel;
use fieldsense_core::selection::{cem_select_with, MseTable, SelectionEvaluator};
use fieldsense_core::{Error as CoreError, Quadrature, SelectionProblem};

use crate::config::{
    CemVsOptimalConfig, ExperimentConfig, MseVsCountsConfig, RegionConfig, SensorSource, Task,
};
use crate::error::{CliError, Result};
use crate::output::{csv_bytes, OutputSet};
use crate::run::{Report, RunContext};

pub fn run_experiment(ctx: &RunContext) -> Result<Report> {
    let Task::Experiment(exp) = &ctx.cfg.task else {
        return Err(CliError::validation("task.kind", "expected experiment"));
    };
    let SensorSource::Synthetic { region, .. } = &ctx.cfg.sensors else {
        return Err(CliError::validation(
            "sensors.source",
            "experiments need synthetic sensors",
        ));
    };
    let mut files = OutputSet::new();
    match exp {
        ExperimentConfig::MseVsCounts(c) => {
            let rows = mse_vs_counts(ctx, region, c)?;
            files.add(
                "mse_vs_counts.csv",
                csv_bytes(
                    &ctx.stamp,
                    &MseRow::HEADER,
                    &rows.iter().map(MseRow::cells).collect::<Vec<_>>(),
                ),
            );
            files.add(
                "mse_vs_counts_summary.csv",
                csv_bytes(
                    &ctx.stamp,
                    &MseSummary::HEADER,
                    &summarize_mse(&rows)
                        .iter()
                        .map(MseSummary::cells)
                        .collect::<Vec<_>>(),
                ),
            );
        }
        ExperimentConfig::CemVsOptimal(c) => {
            let rows = cem_vs_optimal(ctx, region, c)?;
            files.add(
                "cem_vs_optimal.csv",
                csv_bytes(
                    &ctx.stamp,
                    &CemRow::HEADER,
                    &rows.iter().map(CemRow::cells).collect::<Vec<_>>(),
                ),
            );
            files.add(
                "cem_vs_optimal_summary.csv",
                csv_bytes(
                    &ctx.stamp,
                    &CemSummary::HEADER,
                    &summarize_cem(&rows)
                        .iter()
                        .map(CemSummary::cells)
                        .collect::<Vec<_>>(),
                ),
            );
        }
    }
    Ok(Report {
        files,
        failure: None,
    })
}

/// One (sweep, counts, seed) point.
#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    /// `"high"` or `"low"`: which count is swept.
    pub sweep: &'static str,
    pub n_high: usize,
    pub n_low: usize,
    pub seed_index: usize,
    pub layout_seed: u64,
    /// Grid mean of the predictive MSE.
    pub analytic_mse: f64,
    /// Grid mean of the squared error over simulated fields.
    pub empirical_mse: f64,
}

impl MseRow {
    pub const HEADER: [&'static str; 7] = [
        "sweep",
        "n_high",
        "n_low",
        "seed_index",
        "layout_seed",
        "analytic_mse",
        "empirical_mse",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.sweep.to_string(),
            self.n_high.to_string(),
            self.n_low.to_string(),
            self.seed_index.to_string(),
            self.layout_seed.to_string(),
            self.analytic_mse.to_string(),
            self.empirical_mse.to_string(),
        ]
    }
}

/// Sweeps one count over `counts` with the other held at `fixed_count`.
/// Layouts for one seed are nested, so every point adds sensors to the
/// previous one.
pub fn mse_vs_counts(
    ctx: &RunContext,
    region: &RegionConfig,
    c: &MseVsCountsConfig,
) -> Result<Vec<MseRow>> {
    let prior = ctx.prior();
    let grid = c.grid.to_grid();
    grid.validate()?;
    let points = grid.points();
    let quad = Quadrature::default();
    let mut rows = Vec::new();
    for sweep in ["high", "low"] {
        for &count in &c.counts {
            let (n_high, n_low) = if sweep == "high" {
                (count, c.fixed_count)
            } else {
                (c.fixed_count, count)
            };
            for seed_index in 0..c.seeds {
                let layout_seed =
                    rng::derive_seed(ctx.seed, "cli", "mse-vs-counts", seed_index as u64);
                let arr = ctx
                    .cfg
                    .layout(n_high, n_low, region)
                    .generate(layout_seed)?;
                let model = ArrayModel::new(&prior, &arr, &quad)?;
                let analytic =
                    points.iter().map(|q| model.mse_at(q)).sum::<f64>() / points.len() as f64;

                let sim = ObservationSimulator::new(&prior, &arr, &points)?;
                let mut draw_rng = rng::substream(
                    layout_seed,
                    "cli",
                    "mse-vs-counts-draws",
                    (n_high * 100_000 + n_low) as u64,
                );
                let mut sq = 0.0;
                for _ in 0..c.empirical_draws {
                    let d = sim.draw(&mut draw_rng);
                    let fit = model.condition(&d.obs)?;
                    sq += fit
                        .predict_many(&points)
                        .iter()
                        .zip(d.extra.iter())
                        .map(|(p, t)| (p.estimate - t).powi(2))
                        .sum::<f64>();
                }
                let empirical = if c.empirical_draws == 0 {
                    f64::NAN
                } else {
                    sq / (c.empirical_draws * points.len()) as f64
                };
                rows.push(MseRow {
                    sweep,
                    n_high,
                    n_low,
                    seed_index,
                    layout_seed,
                    analytic_mse: analytic,
                    empirical_mse: empirical,
                });
            }
            log::info!("mse-vs-counts: {sweep} sweep, N_H={n_high} N_L={n_low} done");
        }
    }
    Ok(rows)
}

/// Seed-averaged view of [`MseRow`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct MseSummary {
    pub sweep: &'static str,
    pub n_high: usize,
    pub n_low: usize,
    pub seeds: usize,
    pub mean_analytic_mse: f64,
    pub mean_empirical_mse: f64,
    pub se_empirical_mse: f64,
}

impl MseSummary {
    pub const HEADER: [&'static str; 7] = [
        "sweep",
        "n_high",
        "n_low",
        "seeds",
        "mean_analytic_mse",
        "mean_empirical_mse",
        "se_empirical_mse",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.sweep.to_string(),
            self.n_high.to_string(),
            self.n_low.to_string(),
            self.seeds.to_string(),
            self.mean_analytic_mse.to_string(),
            self.mean_empirical_mse.to_string(),
            self.se_empirical_mse.to_string(),
        ]
    }
}

pub fn summarize_mse(rows: &[MseRow]) -> Vec<MseSummary> {
    let mut out: Vec<MseSummary> = Vec::new();
    for r in rows {
        if out
            .last()
            .is_some_and(|s| s.sweep == r.sweep && s.n_high == r.n_high && s.n_low == r.n_low)
        {
            continue;
        }
        let group: Vec<&MseRow> = rows
            .iter()
            .filter(|g| g.sweep == r.sweep && g.n_high == r.n_high && g.n_low == r.n_low)
            .collect();
        let n = group.len() as f64;
        let ma = group.iter().map(|g| g.analytic_mse).sum::<f64>() / n;
        let me = group.iter().map(|g| g.empirical_mse).sum::<f64>() / n;
        let var = if group.len() > 1 {
            group
                .iter()
                .map(|g| (g.empirical_mse - me).powi(2))
                .sum::<f64>()
                / (n - 1.0)
        } else {
            0.0
        };
        out.push(MseSummary {
            sweep: r.sweep,
            n_high: r.n_high,
            n_low: r.n_low,
            seeds: group.len(),
            mean_analytic_mse: ma,
            mean_empirical_mse: me,
            se_empirical_mse: (var / n).sqrt(),
        });
    }
    out
}

/// One (instance, qos, iteration) point.
#[derive(Debug, Clone, PartialEq)]
pub struct CemRow {
    pub instance: usize,
    pub layout_seed: u64,
    pub qos_var: f64,
    pub iter: usize,
    /// Best utility CEM has seen after `iter` iterations; carried forward
    /// once CEM stops early.
    pub cem_best_u: f64,
    pub optimal_u: f64,
    pub feasible: bool,
    pub hit: bool,
}

impl CemRow {
    pub const HEADER: [&'static str; 8] = [
        "instance",
        "layout_seed",
        "qos_var",
        "iter",
        "cem_best_u",
        "optimal_u",
        "feasible",
        "hit",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.instance.to_string(),
            self.layout_seed.to_string(),
            self.qos_var.to_string(),
            self.iter.to_string(),
            self.cem_best_u.to_string(),
            self.optimal_u.to_string(),
            u8::from(self.feasible).to_string(),
            u8::from(self.hit).to_string(),
        ]
    }
}

/// Utilities agree up to summation order of the costs.
pub fn same_utility(a: f64, b: f64) -> bool {
    a == b || (a.is_finite() && b.is_finite() && (a - b).abs() <= 1e-9 * b.abs().max(1.0))
}

pub fn cem_vs_optimal(
    ctx: &RunContext,
    region: &RegionConfig,
    c: &CemVsOptimalConfig,
) -> Result<Vec<CemRow>> {
    let prior = ctx.prior();
    let mut rows = Vec::new();
    for instance in 0..c.instances {
        let layout_seed = rng::derive_seed(ctx.seed, "cli", "cem-vs-optimal", instance as u64);
        let arr = ctx
            .cfg
            .layout(c.n_high, c.n_low, region)
            .generate(layout_seed)?;
        let problem = SelectionProblem {
            query: c.query.to_location(),
            qos_var: c.qos_values[0],
            arr,
            prior,
        };
        let base = SelectionEvaluator::new(&problem)?;
        let table = MseTable::build(&base)?;
        for (qi, &qos) in c.qos_values.iter().enumerate() {
            let eval = base.with_qos(qos);
            let (_, optimal_u) = table.optimum(qos);
            let cem_seed = rng::derive_seed(layout_seed, "cli", "cem-vs-optimal-cem", qi as u64);
            let per_iter: Vec<f64> = match cem_select_with(&eval, &c.cem.with_seed(cem_seed)) {
                Ok(out) => {
                    let mut v: Vec<f64> = out.trace.iter().map(|t| t.best_utility).collect();
                    // a full-mask fallback after a fruitless search lands on the last iteration
                    if let Some(last) = v.last_mut() {
                        *last = last.max(out.state.best_utility);
                    }
                    v
                }
                Err(CoreError::Infeasible { .. }) => vec![f64::NEG_INFINITY],
                Err(e) => return Err(e.into()),
            };
            let feasible = optimal_u.is_finite();
            for iter in 1..=c.cem.max_iters {
                let u = per_iter[(iter - 1).min(per_iter.len() - 1)];
                rows.push(CemRow {
                    instance,
                    layout_seed,
                    qos_var: qos,
                    iter,
                    cem_best_u: u,
                    optimal_u,
                    feasible,
                    hit: same_utility(u, optimal_u),
                });
            }
        }
        log::debug!("cem-vs-optimal: instance {instance} done");
    }
    debug_assert!(rows
        .iter()
        .all(|r| r.cem_best_u <= r.optimal_u || same_utility(r.cem_best_u, r.optimal_u)));
    Ok(rows)
}

/// Per (qos, iteration) counts over instances.
#[derive(Debug, Clone, PartialEq)]
pub struct CemSummary {
    pub qos_var: f64,
    pub iter: usize,
    pub instances: usize,
    pub feasible: usize,
    pub hits: usize,
    pub mean_gap: f64,
}

impl CemSummary {
    pub const HEADER: [&'static str; 6] = [
        "qos_var",
        "iter",
        "instances",
        "feasible",
        "hits",
        "mean_gap",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.qos_var.to_string(),
            self.iter.to_string(),
            self.instances.to_string(),
            self.feasible.to_string(),
            self.hits.to_string(),
            self.mean_gap.to_string(),
        ]
    }
}

/// `mean_gap` averages `optimal_u - cem_best_u` over feasible instances where
/// CEM found something feasible.
pub fn summarize_cem(rows: &[CemRow]) -> Vec<CemSummary> {
    let mut keys: Vec<(f64, usize)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.qos_var, r.iter)) {
            keys.push((r.qos_var, r.iter));
        }
    }
    keys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    keys.into_iter()
        .map(|(q, it)| {
            let g: Vec<&CemRow> = rows
                .iter()
                .filter(|r| r.qos_var == q && r.iter == it)
                .collect();
            let gaps: Vec<f64> = g
                .iter()
                .filter(|r| r.feasible && r.cem_best_u.is_finite())
                .map(|r| r.optimal_u - r.cem_best_u)
                .collect();
            CemSummary {
                qos_var: q,
                iter: it,
                instances: g.len(),
                feasible: g.iter().filter(|r| r.feasible).count(),
                hits: g.iter().filter(|r| r.feasible && r.hit).count(),
                mean_gap: if gaps.is_empty() {
                    f64::NAN
                } else {
                    gaps.iter().sum::<f64>() / gaps.len() as f64
                },
            }
        })
        .collect()
}
