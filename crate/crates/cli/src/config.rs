//! Run configuration, read from a TOML file.
//!
//! ```toml
//! seed = 7
//!
//! [prior.mean]
//! kind = "zero"                  # or: kind = "constant", value = 2.5
//!
//! [prior.kernel]
//! family = "squared-exponential"
//! signal_variance = 5.8
//! lengthscale = 40.0
//!
//! [sensors]
//! source = "synthetic"           # or: source = "csv", path = "sensors.csv"
//! n_high = 50
//! n_low = 50
//! region = { x = [0.0, 100.0], y = [0.0, 100.0] }
//!
//! [network]                      # synthetic sensors only; all optional
//! noise_high = 0.001
//! noise_low = 0.003
//! threshold = 0.0
//! cost_high = 150.0
//! cost_low = 30.0
//!
//! [task]
//! kind = "reconstruct"           # or "select", "experiment"
//! grid = { x = [0.0, 100.0], y = [0.0, 100.0], nx = 50, ny = 50 }
//! ```
//!
//! A `select` task takes `query = { x, y }`, `qos_var` and an optional
//! `[task.cem]` table. An `experiment` task takes `name = "mse-vs-counts"` or
//! `name = "cem-vs-optimal"` plus the optional fields of
//! [`MseVsCountsConfig`] / [`CemVsOptimalConfig`].

use std::path::{Path, PathBuf};

use fieldsense_core::gp::{KernelSpec, Location, MeanSpec, Prior};
use fieldsense_core::obs::{Region, SyntheticLayout};
use fieldsense_core::selection::CemConfig;
use fieldsense_core::GridSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub prior: PriorConfig,
    pub sensors: SensorSource,
    #[serde(default)]
    pub network: NetworkConfig,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub mean: MeanConfig,
    pub kernel: KernelConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeanConfig {
    Zero,
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamilyConfig {
    #[default]
    SquaredExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub family: KernelFamilyConfig,
    pub signal_variance: f64,
    pub lengthscale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl RegionConfig {
    pub fn to_region(&self) -> Region {
        Region::new((self.x[0], self.x[1]), (self.y[0], self.y[1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum SensorSource {
    Synthetic {
        n_high: usize,
        n_low: usize,
        region: RegionConfig,
    },
    Csv {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub noise_high: f64,
    pub noise_low: f64,
    pub threshold: f64,
    pub cost_high: f64,
    pub cost_low: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            noise_high: 0.001,
            noise_low: 0.003,
            threshold: 0.0,
            cost_high: 150.0,
            cost_low: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl GridConfig {
    pub fn to_grid(&self) -> GridSpec {
        GridSpec {
            x_range: (self.x[0], self.x[1]),
            y_range: (self.y[0], self.y[1]),
            nx: self.nx,
            ny: self.ny,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationConfig {
    pub x: f64,
    pub y: f64,
}

impl LocationConfig {
    pub fn to_location(&self) -> Location {
        Location::new(self.x, self.y)
    }
}

/// CEM settings; the seed comes from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CemSettings {
    pub n_samples: usize,
    pub elite_fraction: f64,
    pub smoothing: f64,
    pub max_iters: usize,
    pub p_init: f64,
}

impl Default for CemSettings {
    fn default() -> Self {
        let d = CemConfig::default();
        Self {
            n_samples: d.n_samples,
            elite_fraction: d.elite_fraction,
            smoothing: d.smoothing,
            max_iters: d.max_iters,
            p_init: d.p_init,
        }
    }
}

impl CemSettings {
    pub fn with_seed(&self, seed: u64) -> CemConfig {
        CemConfig {
            n_samples: self.n_samples,
            elite_fraction: self.elite_fraction,
            smoothing: self.smoothing,
            max_iters: self.max_iters,
            p_init: self.p_init,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    Reconstruct {
        grid: GridConfig,
    },
    Select {
        query: LocationConfig,
        qos_var: f64,
        #[serde(default)]
        cem: CemSettings,
    },
    Experiment(ExperimentConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum ExperimentConfig {
    #[serde(rename = "mse-vs-counts")]
    MseVsCounts(MseVsCountsConfig),
    #[serde(rename = "cem-vs-optimal")]
    CemVsOptimal(CemVsOptimalConfig),
}

/// Sweep of high and low sensor counts on nested synthetic layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MseVsCountsConfig {
    pub counts: Vec<usize>,
    /// Count of the network held fixed while the other one is swept.
    pub fixed_count: usize,
    pub seeds: usize,
    pub grid: GridConfig,
    /// Simulated fields per seed for the empirical squared error.
    pub empirical_draws: usize,
}

impl Default for MseVsCountsConfig {
    fn default() -> Self {
        Self {
            counts: vec![5, 10, 20, 40],
            fixed_count: 10,
            seeds: 20,
            grid: GridConfig {
                x: [0.0, 100.0],
                y: [0.0, 100.0],
                nx: 10,
                ny: 10,
            },
            empirical_draws: 50,
        }
    }
}

/// CEM best utility per iteration against the exhaustive optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CemVsOptimalConfig {
    pub instances: usize,
    pub n_high: usize,
    pub n_low: usize,
    pub query: LocationConfig,
    pub qos_values: Vec<f64>,
    pub cem: CemSettings,
}

impl Default for CemVsOptimalConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            n_high: 5,
            n_low: 10,
            query: LocationConfig { x: 10.0, y: 50.0 },
            qos_values: vec![3.4, 3.6, 3.8, 4.0, 4.2, 4.4],
            cem: CemSettings::default(),
        }
    }
}

impl RunConfig {
    /// Parses TOML text; relative CSV paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, origin: &Path, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if let SensorSource::Csv { path } = &mut cfg.sensors {
            if path.is_relative() {
                *path = base_dir.join(&*path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn prior(&self) -> Prior {
        let mean = match self.prior.mean {
            MeanConfig::Zero => MeanSpec::Zero,
            MeanConfig::Constant { value } => MeanSpec::Constant(value),
        };
        let k = self.prior.kernel;
        Prior::new(
            mean,
            KernelSpec::squared_exponential(k.signal_variance, k.lengthscale),
        )
    }

    pub fn layout(&self, n_high: usize, n_low: usize, region: &RegionConfig) -> SyntheticLayout {
        let n = &self.network;
        SyntheticLayout {
            n_high,
            n_low,
            region: region.to_region(),
            noise_high: n.noise_high,
            noise_low: n.noise_low,
            threshold: n.threshold,
            cost_high: n.cost_high,
            cost_low: n.cost_low,
        }
    }

    /// Short hash of the configuration with seed and output directory blanked.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        c.out_dir = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json)[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checks every field, reporting the first offender by its key path.
    pub fn validate(&self) -> Result<()> {
        let v = |field: &str, msg: String| Err(CliError::validation(field, msg));
        let positive = |x: f64| x > 0.0 && x.is_finite();
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        let interval = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] < r[1];

        if let MeanConfig::Constant { value } = self.prior.mean {
            if !value.is_finite() {
                return v("prior.mean.value", format!("must be finite, got {value}"));
            }
        }
        let k = &self.prior.kernel;
        if !positive(k.signal_variance) {
            return v(
                "prior.kernel.signal_variance",
                format!("must be > 0, got {}", k.signal_variance),
            );
        }
        if !positive(k.lengthscale) {
            return v(
                "prior.kernel.lengthscale",
                format!("must be > 0, got {}", k.lengthscale),
            );
        }

        match &self.sensors {
            SensorSource::Synthetic { region, .. } => {
                if !interval(region.x) {
                    return v(
                        "sensors.region.x",
                        format!("need finite lo < hi, got {:?}", region.x),
                    );
                }
                if !interval(region.y) {
                    return v(
                        "sensors.region.y",
                        format!("need finite lo < hi, got {:?}", region.y),
                    );
                }
            }
            SensorSource::Csv { path } => {
                if !path.is_file() {
                    return v(
                        "sensors.path",
                        format!("file {} does not exist", path.display()),
                    );
                }
            }
        }

        let n = &self.network;
        for (name, x) in [
            ("network.noise_high", n.noise_high),
            ("network.noise_low", n.noise_low),
        ] {
            if !nonneg(x) {
                return v(name, format!("must be >= 0, got {x}"));
            }
        }
        for (name, x) in [
            ("network.cost_high", n.cost_high),
            ("network.cost_low", n.cost_low),
        ] {
            if !nonneg(x) {
                return v(name, format!("must be >= 0, got {x}"));
            }
        }
        if n.threshold.is_nan() {
            return v("network.threshold", "must not be NaN".into());
        }

        let check_grid = |prefix: &str, g: &GridConfig| -> Result<()> {
            if !(g.x[0].is_finite() && g.x[1].is_finite() && g.x[0] <= g.x[1]) {
                return v(
                    &format!("{prefix}.x"),
                    format!("need finite lo <= hi, got {:?}", g.x),
                );
            }
            if !(g.y[0].is_finite() && g.y[1].is_finite() && g.y[0] <= g.y[1]) {
                return v(
                    &format!("{prefix}.y"),
                    format!("need finite lo <= hi, got {:?}", g.y),
                );
            }
            if g.nx == 0 {
                return v(&format!("{prefix}.nx"), "must be >= 1".into());
            }
            if g.ny == 0 {
                return v(&format!("{prefix}.ny"), "must be >= 1".into());
            }
            Ok(())
        };
        let check_cem = |prefix: &str, c: &CemSettings| -> Result<()> {
            c.with_seed(0)
                .validate()
                .map_err(|e| CliError::validation(prefix, e.to_string()))
        };
        let check_query = |prefix: &str, q: &LocationConfig| -> Result<()> {
            if q.x.is_finite() && q.y.is_finite() {
                Ok(())
            } else {
                v(prefix, "coordinates must be finite".into())
            }
        };

        match &self.task {
            Task::Reconstruct { grid } => check_grid("task.grid", grid)?,
            Task::Select {
                query,
                qos_var,
                cem,
            } => {
                check_query("task.query", query)?;
                if !positive(*qos_var) {
                    return v("task.qos_var", format!("must be > 0, got {qos_var}"));
                }
                check_cem("task.cem", cem)?;
            }
            Task::Experiment(exp) => {
                if !matches!(self.sensors, SensorSource::Synthetic { .. }) {
                    return v(
                        "sensors.source",
                        "experiments need synthetic sensors".into(),
                    );
                }
                match exp {
                    ExperimentConfig::MseVsCounts(c) => {
                        if c.counts.is_empty() {
                            return v("task.counts", "must not be empty".into());
                        }
                        if c.seeds == 0 {
                            return v("task.seeds", "must be >= 1".into());
                        }
                        check_grid("task.grid", &c.grid)?;
                    }
                    ExperimentConfig::CemVsOptimal(c) => {
                        check_query("task.query", &c.query)?;
                        if c.qos_values.is_empty() {
                            return v("task.qos_values", "must not be empty".into());
                        }
                        if let Some(q) = c.qos_values.iter().find(|q| !positive(**q)) {
                            return v("task.qos_values", format!("entries must be > 0, got {q}"));
                        }
                        if c.n_high + c.n_low > fieldsense_core::selection::BRUTE_FORCE_LIMIT {
                            return v(
                                "task.n_high",
                                format!(
                                    "n_high + n_low must be <= {}",
                                    fieldsense_core::selection::BRUTE_FORCE_LIMIT
                                ),
                            );
                        }
                        check_cem("task.cem", &c.cem)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::validation("--config", format!("cannot read {}: {e}", path.display()))
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    RunConfig::from_toml_str(&text, path, base)
}
