//! `pmpscan`: phase measuring profilometry pipeline with bimodal multipath
//! separation. See README for a walkthrough.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

mod commands;
mod config;
mod report;

use commands::CmdError;

#[derive(Parser)]
#[command(
    name = "pmpscan",
    version,
    about = "Structured light scanning pipeline: pattern generation, simulation, \
             MTF calibration, bimodal multipath separation, and point export"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a multi-frequency phase-shift pattern stack
    GenPatterns(GenPatternsArgs),
    /// Render a synthetic scan of a built-in or JSON scene
    Simulate(SimulateArgs),
    /// Estimate the optical MTF envelope from a flat-target scan
    Calibrate(CalibrateArgs),
    /// Extract, normalize, separate, and unwrap a scan; write report
    Run(RunArgs),
    /// Export per-pixel |AB|(K) sweeps as CSV
    ExportSweep(ExportSweepArgs),
    /// Export separated paths as an x y z point list (synthetic geometry)
    ExportPoints(ExportPointsArgs),
}

#[derive(clap::Args)]
pub struct GenPatternsArgs {
    /// Flat JSON config; flags override file values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Projector rows
    #[arg(long)]
    pub rows: Option<u32>,
    /// Projector columns
    #[arg(long)]
    pub cols: Option<u32>,
    /// Phase shifts per frequency (N)
    #[arg(long)]
    pub shifts: Option<u32>,
    /// Comma-separated nonzero frequencies; defaults to the full sweep
    #[arg(long, value_delimiter = ',')]
    pub frequencies: Option<Vec<u32>>,
    /// Include the zero-frequency pattern set
    #[arg(long)]
    pub zero: bool,
    /// Allow wavelengths that are not integer multiples of N pixels
    #[arg(long)]
    pub no_strict: bool,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// step-edge, screen, flat, or a scene JSON path
    #[arg(long)]
    pub scene: Option<String>,
    #[arg(long)]
    pub rows: Option<u32>,
    #[arg(long)]
    pub cols: Option<u32>,
    #[arg(long)]
    pub shifts: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub frequencies: Option<Vec<u32>>,
    #[arg(long)]
    pub zero: bool,
    /// Camera grid rows
    #[arg(long)]
    pub camera_rows: Option<usize>,
    /// Camera grid columns
    #[arg(long)]
    pub camera_cols: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Additive Gaussian noise sigma per sample
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// identity, gaussian, or gaussian:<k0>
    #[arg(long)]
    pub envelope: Option<String>,
    #[arg(long)]
    pub albedo: Option<f64>,
    /// Foreground row fraction (step-edge)
    #[arg(long)]
    pub y_fg: Option<f64>,
    /// Background row fraction (step-edge)
    #[arg(long)]
    pub y_bg: Option<f64>,
    #[arg(long)]
    pub edge_col: Option<usize>,
    /// Edge ramp width in pixels (1-3)
    #[arg(long)]
    pub edge_band: Option<usize>,
    #[arg(long)]
    pub mesh_period: Option<f64>,
    #[arg(long)]
    pub mesh_duty: Option<f64>,
    #[arg(long)]
    pub y_screen: Option<f64>,
    #[arg(long)]
    pub y_object: Option<f64>,
    /// Peak height variation of the object surface (screen scene)
    #[arg(long)]
    pub object_relief: Option<f64>,
    /// Row fraction of the flat scene
    #[arg(long)]
    pub flat_y: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Flat-target scan directory
    #[arg(long)]
    pub scan: PathBuf,
    #[arg(long)]
    pub shadow_threshold: Option<f64>,
    /// Output CSV path; a .json metadata sidecar is written next to it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scan directory (from simulate or a real capture)
    #[arg(long)]
    pub scan: PathBuf,
    /// Envelope CSV from calibrate; identity gains if omitted
    #[arg(long)]
    pub envelope: Option<PathBuf>,
    /// Ground-truth scene JSON; defaults to <scan>/truth.json when present
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Magnitude grid step
    #[arg(long)]
    pub mag_step: Option<f64>,
    /// Row-fraction grid step
    #[arg(long)]
    pub row_step: Option<f64>,
    #[arg(long)]
    pub multipath_threshold: Option<f64>,
    #[arg(long)]
    pub stage1_reject_threshold: Option<f64>,
    #[arg(long)]
    pub shadow_threshold: Option<f64>,
    /// Traditional unwrap chain, ascending from K=1
    #[arg(long, value_delimiter = ',')]
    pub chain: Option<Vec<u32>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct ExportSweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scan: PathBuf,
    /// Envelope CSV; identity if omitted
    #[arg(long)]
    pub envelope: Option<PathBuf>,
    /// Divide by the envelope and rescale so AB0 = 1
    #[arg(long)]
    pub normalized: bool,
    #[arg(long)]
    pub shadow_threshold: Option<f64>,
    /// Pixels as row,col (repeatable)
    #[arg(long, required = true, num_args = 1..)]
    pub pixels: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct ExportPointsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory of a previous `run`
    #[arg(long)]
    pub run_dir: PathBuf,
    /// Z extent per unit row fraction (synthetic, non-metric)
    #[arg(long)]
    pub baseline: Option<f64>,
    /// X/Y spacing per camera pixel
    #[arg(long)]
    pub pitch: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };

    let result = match cli.command {
        Command::GenPatterns(args) => commands::gen_patterns(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Calibrate(args) => commands::calibrate(args),
        Command::Run(args) => commands::run(args),
        Command::ExportSweep(args) => commands::export_sweep(args),
        Command::ExportPoints(args) => commands::export_points(args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Usage(msg)) => {
            let cmd = Cli::command();
            eprintln!("error: {msg}");
            eprintln!("run `{} --help` for usage", cmd.get_name());
            ExitCode::from(1)
        }
        Err(CmdError::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
