//! Task runners. Each one computes everything first and returns the files
//! to write; the caller writes them afterwards.

use std::path::PathBuf;

use fieldsense_core::obs::ObservationSimulator;
use fieldsense_core::rng;
use fieldsense_core::sblue::{ArrayModel, Raster};
use fieldsense_core::selection::{cem_select_with, SelectionEvaluator};
use fieldsense_core::{
    ActivationMask, Error as CoreError, Network, ObservationVector, Prior, Quadrature,
    SelectionProblem, SensorArray,
};

use crate::config::{RunConfig, SensorSource, Task};
use crate::error::{CliError, Result};
use crate::output::{csv_bytes, pgm_bytes, raster_csv, summary_bytes, OutputSet, Stamp};
use crate::sensors_csv::{ingest_sensors, write_sensors};

/// A validated config with its effective seed.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub cfg: RunConfig,
    pub seed: u64,
    pub stamp: Stamp,
}

impl RunContext {
    pub fn new(cfg: RunConfig, seed_override: Option<u64>) -> Self {
        let seed = seed_override.unwrap_or(cfg.seed);
        let stamp = Stamp {
            config_hash: cfg.config_hash(),
            seed,
        };
        Self { cfg, seed, stamp }
    }

    pub fn prior(&self) -> Prior {
        self.cfg.prior()
    }

    pub fn out_dir(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| self.cfg.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Files produced by a task, plus the error to report after writing them.
#[derive(Debug)]
pub struct Report {
    pub files: OutputSet,
    pub failure: Option<CliError>,
}

impl Report {
    fn ok(files: OutputSet) -> Self {
        Self {
            files,
            failure: None,
        }
    }
}

pub fn run_task(ctx: &RunContext) -> Result<Report> {
    match &ctx.cfg.task {
        Task::Reconstruct { .. } => run_reconstruct(ctx),
        Task::Select { .. } => run_select(ctx),
        Task::Experiment(_) => crate::experiments::run_experiment(ctx),
    }
}

/// Sensor array from the configured source, with readings when the source
/// has them.
pub fn load_sensors(ctx: &RunContext) -> Result<(SensorArray, Option<ObservationVector>)> {
    match &ctx.cfg.sensors {
        SensorSource::Synthetic {
            n_high,
            n_low,
            region,
        } => {
            let arr = ctx.cfg.layout(*n_high, *n_low, region).generate(ctx.seed)?;
            Ok((arr, None))
        }
        SensorSource::Csv { path } => {
            let got = ingest_sensors(path)?;
            Ok((got.array, got.readings))
        }
    }
}

fn fmt(x: f64) -> String {
    x.to_string()
}

pub fn run_reconstruct(ctx: &RunContext) -> Result<Report> {
    let Task::Reconstruct { grid } = &ctx.cfg.task else {
        return Err(CliError::validation("task.kind", "expected reconstruct"));
    };
    let grid = grid.to_grid();
    grid.validate()?;
    let prior = ctx.prior();
    let (arr, file_readings) = load_sensors(ctx)?;
    let points = grid.points();

    let simulated = file_readings.is_none();
    let (obs, truth) = match file_readings {
        Some(obs) => (obs, None),
        None => {
            let sim = ObservationSimulator::new(&prior, &arr, &points)?;
            let draw = sim.draw(&mut rng::stream(ctx.seed, "cli", "reconstruct"));
            (draw.obs, Some(draw.extra))
        }
    };

    let model = ArrayModel::new(&prior, &arr, &Quadrature::default())?;
    let fitted = model.condition(&obs)?;
    let raster = Raster {
        grid,
        cells: fitted.predict_many(&points),
    };
    let est: Vec<f64> = raster.cells.iter().map(|c| c.estimate).collect();
    let mse: Vec<f64> = raster.cells.iter().map(|c| c.mse).collect();

    let s = &ctx.stamp;
    let mut files = OutputSet::new();
    let mut sensors = Vec::new();
    write_sensors(&mut sensors, &arr, Some(&obs)).expect("in-memory write");
    files.add(
        "sensors.csv",
        [format!("{}\n", s.comment()).into_bytes(), sensors].concat(),
    );
    files.add("field.csv", raster_csv(s, &raster, |i| est[i]));
    files.add("field.pgm", pgm_bytes(s, grid.nx, grid.ny, &est));
    files.add("mse.csv", raster_csv(s, &raster, |i| mse[i]));
    files.add("mse.pgm", pgm_bytes(s, grid.nx, grid.ny, &mse));

    let mut summary = vec![
        ("n_sensors", arr.len().to_string()),
        ("n_high", arr.n_high().to_string()),
        ("n_low", arr.n_low().to_string()),
        (
            "readings",
            if simulated { "simulated" } else { "file" }.to_string(),
        ),
        ("nx", grid.nx.to_string()),
        ("ny", grid.ny.to_string()),
        ("grid_mean_mse", fmt(raster.mean_mse())),
        ("jitter", fmt(model.jitter())),
    ];
    if let Some(truth) = &truth {
        files.add("truth.csv", raster_csv(s, &raster, |i| truth[i]));
        let sq: f64 = est
            .iter()
            .zip(truth.iter())
            .map(|(e, t)| (e - t) * (e - t))
            .sum();
        summary.push(("grid_mean_sq_error", fmt(sq / est.len() as f64)));
    }
    files.add("summary.csv", summary_bytes(s, &summary));
    log::info!(
        "reconstructed {}x{} grid, mean mse {}",
        grid.nx,
        grid.ny,
        raster.mean_mse()
    );
    Ok(Report::ok(files))
}

pub fn run_select(ctx: &RunContext) -> Result<Report> {
    let Task::Select {
        query,
        qos_var,
        cem,
    } = &ctx.cfg.task
    else {
        return Err(CliError::validation("task.kind", "expected select"));
    };
    let (arr, _) = load_sensors(ctx)?;
    let problem = SelectionProblem {
        query: query.to_location(),
        qos_var: *qos_var,
        arr: arr.clone(),
        prior: ctx.prior(),
    };
    let eval = SelectionEvaluator::new(&problem)?;
    let full_mse = eval.mse(&ActivationMask::full(arr.len()))?;
    let cem_cfg = cem.with_seed(rng::derive_seed(ctx.seed, "cli", "select", 0));
    let s = &ctx.stamp;
    let mut files = OutputSet::new();
    let base = |feasible: bool| {
        vec![
            ("feasible", feasible.to_string()),
            ("query_x", fmt(query.x)),
            ("query_y", fmt(query.y)),
            ("qos_var", fmt(*qos_var)),
            ("prior_var", fmt(eval.bundle().prior_var)),
            ("full_mse", fmt(full_mse)),
        ]
    };

    let outcome = match cem_select_with(&eval, &cem_cfg) {
        Ok(o) => o,
        Err(e @ CoreError::Infeasible { .. }) => {
            files.add("summary.csv", summary_bytes(s, &base(false)));
            return Ok(Report {
                files,
                failure: Some(e.into()),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let st = &outcome.state;
    let mask = &st.best_mask;
    let achieved = eval.mse(mask)?;

    let rows: Vec<Vec<String>> = arr
        .sensors()
        .iter()
        .zip(&mask.bits)
        .map(|(sn, &on)| {
            vec![
                sn.id.clone(),
                match sn.network {
                    Network::High => "H",
                    Network::Low => "L",
                }
                .to_string(),
                fmt(sn.cost),
                u8::from(on).to_string(),
            ]
        })
        .collect();
    files.add(
        "selection.csv",
        csv_bytes(s, &["id", "network", "cost", "active"], &rows),
    );

    let trace: Vec<Vec<String>> = outcome
        .trace
        .iter()
        .map(|t| {
            vec![
                t.iter.to_string(),
                fmt(t.beta),
                fmt(t.best_utility),
                fmt(t.p_mean),
            ]
        })
        .collect();
    files.add(
        "trace.csv",
        csv_bytes(s, &["iter", "beta_t", "best_u", "p_mean"], &trace),
    );

    let active = mask.active();
    let n_high = active
        .iter()
        .filter(|&&i| arr.get(i).network == Network::High)
        .count();
    let mut summary = base(true);
    summary.extend([
        ("n_active", active.len().to_string()),
        ("n_active_high", n_high.to_string()),
        ("n_active_low", (active.len() - n_high).to_string()),
        ("cost", fmt(eval.cost(mask))),
        ("achieved_mse", fmt(achieved)),
        ("utility", fmt(st.best_utility)),
        ("iterations", st.iter.to_string()),
    ]);
    files.add("summary.csv", summary_bytes(s, &summary));
    log::info!(
        "selected {} of {} sensors, utility {}",
        active.len(),
        arr.len(),
        st.best_utility
    );
    Ok(Report::ok(files))
}
