use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fieldsense_cli::config::Task;
use fieldsense_cli::oracle::{run_oracle, OracleSettings};
use fieldsense_cli::output::Stamp;
use fieldsense_cli::run::{run_task, Report, RunContext};
use fieldsense_cli::{load_config, CliError};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(
    name = "fieldsense",
    version,
    about = "Field reconstruction and sensor selection for heterogeneous sensor networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the field and its MSE over a grid.
    Reconstruct(Common),
    /// Choose sensors meeting an MSE bound at minimum cost.
    Select(Common),
    /// Run a named experiment from the config.
    Experiment(Common),
    /// Run the Monte-Carlo and brute-force verification suite.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration (optional for `oracle`).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn task_name(t: &Task) -> &'static str {
    match t {
        Task::Reconstruct { .. } => "reconstruct",
        Task::Select { .. } => "select",
        Task::Experiment(_) => "experiment",
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (want, common) = match cli.command {
        Command::Reconstruct(c) => ("reconstruct", c),
        Command::Select(c) => ("select", c),
        Command::Experiment(c) => ("experiment", c),
        Command::Oracle(c) => ("oracle", c),
    };

    let (report, out_dir) = if want == "oracle" {
        let settings = OracleSettings::default();
        let (stamp, seed, out) = match &common.config {
            Some(path) => {
                let ctx = RunContext::new(load_config(path)?, common.seed);
                let out = ctx.out_dir(common.out.clone());
                (ctx.stamp, ctx.seed, out)
            }
            None => {
                let seed = common.seed.unwrap_or(0);
                let hash: String = Sha256::digest(format!("{settings:?}").as_bytes())[..8]
                    .iter()
                    .map(|b| format!("{b:02x}"))
                    .collect();
                let stamp = Stamp {
                    config_hash: hash,
                    seed,
                };
                (
                    stamp,
                    seed,
                    common.out.clone().unwrap_or_else(|| PathBuf::from("out")),
                )
            }
        };
        (run_oracle(&stamp, seed, &settings)?, out)
    } else {
        let path = common.config.as_ref().ok_or_else(|| {
            CliError::validation("--config", format!("`{want}` needs a config file"))
        })?;
        let ctx = RunContext::new(load_config(path)?, common.seed);
        let have = task_name(&ctx.cfg.task);
        if have != want {
            return Err(CliError::validation(
                "task.kind",
                format!("config describes a `{have}` task, not `{want}`"),
            ));
        }
        let out = ctx.out_dir(common.out.clone());
        (run_task(&ctx)?, out)
    };

    let Report { files, failure } = report;
    for p in files.write_all(&out_dir)? {
        log::info!("wrote {}", p.display());
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
