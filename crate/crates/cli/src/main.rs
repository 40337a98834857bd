//! `edgemind`: config-driven driver for the trace simulator, controller
//! clustering, clustering evaluation, user-count forecasting, and route
//! ranking.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error,
//! 3 numerical failure.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use edgemind::cluster::ClusterError;
use edgemind::eval::EvalError;
use edgemind::forecast::ForecastError;
use edgemind::mobsim::SimError;
use edgemind::routes::RouteError;
use edgemind::telemetry::TelemetryError;

#[derive(Parser)]
#[command(
    name = "edgemind",
    version,
    about = "Handover-driven controller clustering and user-count forecasting on mobility traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct CommonArgs {
    /// TOML configuration file for this subcommand.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic mobility trace.
    Simulate(CommonArgs),
    /// Compute one station-to-controller assignment.
    Cluster(CommonArgs),
    /// Evaluate assignments: ratios, sweeps, propagation delays.
    EvalClusters(CommonArgs),
    /// Run the local- vs cluster-based forecasting experiment.
    Forecast(CommonArgs),
    /// Rank candidate routes from predicted user counts.
    RankRoutes(CommonArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let mut cfg: config::SimulateConfig = config::load_toml(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            commands::simulate::run(&args.config, cfg, &args.out)
        }
        Command::Cluster(args) => {
            let mut cfg: config::ClusterConfig = config::load_toml(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            commands::cluster::run(&args.config, cfg, &args.out)
        }
        Command::EvalClusters(args) => {
            let mut cfg: config::EvalClustersConfig = config::load_toml(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            commands::eval_clusters::run(&args.config, cfg, &args.out)
        }
        Command::Forecast(args) => {
            let mut cfg: config::ForecastConfig = config::load_toml(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            commands::forecast::run(&args.config, cfg, &args.out)
        }
        Command::RankRoutes(args) => {
            let cfg: config::RankRoutesConfig = config::load_toml(&args.config)?;
            commands::rank_routes::run(&args.config, cfg, &args.out)
        }
    }
}

/// 1 = configuration, 2 = data, 3 = numerical.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<SimError>() {
            let SimError::Config(_) = e;
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<TelemetryError>() {
            return match e {
                TelemetryError::Io(_)
                | TelemetryError::Parse { .. }
                | TelemetryError::Schema { .. }
                | TelemetryError::Invalid(_) => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<ClusterError>() {
            return match e {
                ClusterError::Infeasible(_) => 1,
                ClusterError::Shape(_) => 2,
                ClusterError::Convergence(_) => 3,
            };
        }
        if let Some(e) = cause.downcast_ref::<EvalError>() {
            return match e {
                EvalError::Config(_) => 1,
                EvalError::Shape(_) => 2,
                EvalError::Cluster(ClusterError::Infeasible(_)) => 1,
                EvalError::Cluster(ClusterError::Shape(_)) => 2,
                EvalError::Cluster(ClusterError::Convergence(_)) => 3,
            };
        }
        if let Some(e) = cause.downcast_ref::<ForecastError>() {
            return match e {
                ForecastError::Config(_) => 1,
                ForecastError::InsufficientData(_)
                | ForecastError::Alignment(_)
                | ForecastError::Shape(_) => 2,
                ForecastError::Cholesky(_)
                | ForecastError::NonStationary(_)
                | ForecastError::LeakageGuard => 3,
            };
        }
        if let Some(e) = cause.downcast_ref::<RouteError>() {
            return match e {
                RouteError::InvalidRoute(_, _) => 1,
                RouteError::MissingPrediction { .. } | RouteError::MissingCapacity(_) => 2,
            };
        }
    }
    // Config file trouble (missing file, bad TOML) and everything else.
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}
