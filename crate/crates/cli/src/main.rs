mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tdh_core::circuit::Board;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "tdh", version, about = "Tunnel-diode harmonic tag simulator and analysis toolkit")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML (or .json) run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Board preset (board1..board5).
    #[arg(long, global = true)]
    board: Option<Board>,
    /// Bias voltage in volts.
    #[arg(long, global = true)]
    bias: Option<f64>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one bias point and write trace, spectrum, harmonics and a report.
    Simulate {
        /// Simulated time in seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Sweep the bias and write a signature map with colour-map and fundamental CSVs.
    Sweep {
        #[arg(long)]
        bias_start: Option<f64>,
        #[arg(long)]
        bias_stop: Option<f64>,
        #[arg(long)]
        bias_step: Option<f64>,
        /// Points per spectrum row.
        #[arg(long)]
        points: Option<usize>,
        /// Simulated time per bias point in seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Fingerprint database operations.
    #[command(subcommand)]
    Fingerprint(FingerprintCommand),
    /// Reverse and forward link budgets.
    Linkbudget,
    /// Export auxiliary data.
    #[command(subcommand)]
    Export(ExportCommand),
}

#[derive(Debug, Subcommand)]
pub enum FingerprintCommand {
    /// Enroll a board from three or more signature maps.
    Enroll {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(required = true)]
        maps: Vec<PathBuf>,
    },
    /// Identify a signature map against the database.
    Identify {
        #[arg(long)]
        db: PathBuf,
        map: PathBuf,
    },
    /// Measure how far a board's map has drifted from its enrolled template.
    Tamper {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        id: String,
        map: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExportCommand {
    /// Diode IV curve of the selected circuit.
    Iv {
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
    /// The effective run configuration as TOML.
    Config,
    /// Colour-map CSV triplets from a saved signature map.
    Colormap { map: PathBuf },
    /// Feature vector of a saved signature map.
    Features { map: PathBuf },
}

fn resolve_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(board) = common.board {
        config.board = board;
        config.circuit = None;
    }
    if let Some(bias) = common.bias {
        config.simulation.bias = bias;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.sweep.seed = config.seed;
    if let Some(out) = &common.out {
        config.out = out.clone();
    }
    Ok(config)
}

fn configure_workers() -> Result<()> {
    if let Ok(value) = std::env::var("TDH_NUM_WORKERS") {
        let n: usize = value.trim().parse().context("TDH_NUM_WORKERS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().ok();
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    configure_workers()?;
    let mut config = resolve_config(&cli.common)?;
    match cli.command {
        Command::Simulate { duration } => {
            if let Some(d) = duration {
                config.simulation.duration = d;
            }
            commands::simulate(&config)
        }
        Command::Sweep { bias_start, bias_stop, bias_step, points, duration } => {
            let sweep = &mut config.sweep;
            if let Some(v) = bias_start {
                sweep.bias_start = v;
            }
            if let Some(v) = bias_stop {
                sweep.bias_stop = v;
            }
            if let Some(v) = bias_step {
                sweep.bias_step = v;
            }
            if let Some(v) = points {
                sweep.points_per_spectrum = v;
            }
            if let Some(v) = duration {
                sweep.duration = v;
            }
            commands::sweep(&config)
        }
        Command::Fingerprint(cmd) => commands::fingerprint(&config, cmd),
        Command::Linkbudget => commands::linkbudget(&config),
        Command::Export(cmd) => commands::export(&config, cmd),
    }
}
