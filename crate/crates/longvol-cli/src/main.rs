use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

mod commands;
mod config;
mod emit;
mod error;

use commands::Overrides;
use emit::{RunManifest, RunOutput};
use error::{CliError, ErrorKind};

#[derive(Parser)]
#[command(
    name = "longvol",
    version,
    about = "Long-memory volatility model: kernels, moments, autocovariance, simulation"
)]
struct Cli {
    /// Model and run configuration (.toml, or .json with the same shape)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the ensemble seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the ensemble path count
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Override the grid step
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Override the time horizon
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Directory for result files plus run_manifest.json
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// What goes to stdout: the JSON summary or the primary CSV table
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads for path generation; affects speed only, never results
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Check balance, stationarity, and memory class
    Validate,
    /// Tabulate the kernel and its norms
    Analyze,
    /// Solve the second-moment equation (and resolvent) on a grid
    Solve,
    /// Autocovariance curve with decay asymptotes
    Gamma,
    /// Monte Carlo ensemble with estimator summaries
    Simulate,
    /// Discrete-time recursion: margin, memory, and sample paths
    Discrete,
    /// Full theory-vs-simulation verdict table
    Report,
}

impl Cmd {
    fn name(self) -> &'static str {
        match self {
            Cmd::Validate => "validate",
            Cmd::Analyze => "analyze",
            Cmd::Solve => "solve",
            Cmd::Gamma => "gamma",
            Cmd::Simulate => "simulate",
            Cmd::Discrete => "discrete",
            Cmd::Report => "report",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.render());
            ExitCode::from(e.kind.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let config_path = cli.config.as_ref().ok_or_else(|| {
        CliError::new(ErrorKind::Config, "cli", "run", "--config is required".to_string())
    })?;
    let mut file = config::load(config_path)?;
    let ov = Overrides { seed: cli.seed, paths: cli.paths, step: cli.step, horizon: cli.horizon };
    commands::apply_overrides(&mut file, &ov);

    let dispatch = || match cli.cmd {
        Cmd::Validate => commands::validate(&file),
        Cmd::Analyze => commands::analyze(&file, &ov),
        Cmd::Solve => commands::solve(&file),
        Cmd::Gamma => commands::gamma_cmd(&file),
        Cmd::Simulate => commands::simulate_cmd(&file),
        Cmd::Discrete => commands::discrete_cmd(&file),
        Cmd::Report => commands::report_cmd(&file),
    };

    let started = Instant::now();
    let output = match cli.threads {
        Some(n) => {
            if n == 0 {
                return Err(CliError::new(
                    ErrorKind::Config,
                    "cli",
                    "run",
                    "--threads must be at least 1".to_string(),
                ));
            }
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| {
                CliError::new(ErrorKind::Config, "cli", "thread_pool", e.to_string())
            })?;
            pool.install(dispatch)?
        }
        None => dispatch()?,
    };
    let elapsed_ms = started.elapsed().as_millis() as u64;

    if let Some(dir) = &cli.out {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            subcommand: cli.cmd.name().to_string(),
            seed: manifest_seed(cli.cmd, &file),
            // threads is omitted: it never affects results, so it is not
            // part of what reproduction needs
            parameters: json!({
                "seed": cli.seed,
                "paths": cli.paths,
                "step": cli.step,
                "horizon": cli.horizon,
            }),
            config: serde_json::to_value(&file).expect("config snapshot"),
            outputs: Vec::new(),
            timings_ms: json!({"total": elapsed_ms}),
        };
        emit::write_all(dir, &output, manifest)?;
    }

    print_stdout(&output, cli.format);
    match output.failure {
        Some(f) => {
            eprintln!("{}", f.render());
            Ok(ExitCode::from(f.kind.exit_code()))
        }
        None => Ok(ExitCode::SUCCESS),
    }
}

fn manifest_seed(cmd: Cmd, file: &config::FileConfig) -> Option<u64> {
    match cmd {
        Cmd::Simulate | Cmd::Report => Some(file.sim.seed),
        Cmd::Discrete => file.discrete.as_ref().map(|d| d.seed),
        _ => None,
    }
}

fn print_stdout(output: &RunOutput, format: Format) {
    match format {
        Format::Csv if !output.csv_files.is_empty() => {
            print!("{}", output.csv_files[0].1);
        }
        _ => print!("{}", emit::to_pretty(&output.summary)),
    }
}
