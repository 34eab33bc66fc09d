//! `sinterbench`: run the closed loop, propagate measurement noise with
//! either engine, calibrate thermal-camera readings and benchmark the engines.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sinterbench", version, about = "Measurement-uncertainty propagation through a laser-power control loop")]
pub struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `none`, `gaussian:MU,SIGMA` or `uniform:A,B`.
    #[arg(long, global = true, value_name = "SPEC")]
    pub noise: Option<String>,
    /// Control iterations per run.
    #[arg(long, global = true)]
    pub iters: Option<usize>,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// One closed-loop run: nominal, or a single noisy path.
    Sim,
    /// Monte Carlo ensemble.
    Mc {
        #[arg(long)]
        paths: Option<usize>,
        /// Iterations whose full samples are written (the last is always kept).
        #[arg(long, value_delimiter = ',', value_name = "ITERS")]
        record: Vec<usize>,
    },
    /// Dirac-mixture propagation.
    Dist {
        /// Representation size N.
        #[arg(long)]
        rep: Option<usize>,
    },
    /// Convert a raw camera signal to temperature.
    Calib(CalibArgs),
    /// Accuracy/runtime comparison of both engines.
    Bench {
        /// JSON benchmark plan; replaces the config's bench block.
        #[arg(long, value_name = "PATH", conflicts_with = "quick")]
        plan: Option<PathBuf>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Short ladders for a smoke run.
        #[arg(long)]
        quick: bool,
        /// Run cells concurrently; runtimes are then not comparable.
        #[arg(long)]
        parallel_cells: bool,
    },
    /// Grid search for the gains with the smallest nominal steady-state error.
    Tune {
        /// e.g. `kp=0.05,0.1;ki=0.05;kd=5e-5`
        #[arg(long, value_name = "SPEC")]
        grid: String,
    },
}

#[derive(Debug, Args)]
pub struct CalibArgs {
    #[arg(long)]
    pub raw: Option<f64>,
    #[command(flatten)]
    pub mode: CalibMode,
    /// Reflected temperature 293.15 K instead of the printed 0 K.
    #[arg(long)]
    pub sane_defaults: bool,
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct CalibMode {
    /// Single value at the nominal parameters.
    #[arg(long)]
    pub point: bool,
    /// Monte Carlo over the parameter intervals with M draws.
    #[arg(long, value_name = "M")]
    pub mc: Option<usize>,
    /// Dirac-mixture propagation with N points per parameter.
    #[arg(long, value_name = "N")]
    pub mixture: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Scale {
    AsPrinted,
    NoOffset,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
