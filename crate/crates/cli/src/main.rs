//! Command-line front end for the triplet-sensing toolkit.
//!
//! Every subcommand reads an optional TOML configuration (defaults are the
//! standard operating values), applies flag overrides, echoes the resolved
//! configuration and writes CSV tables or key=value reports. Identical
//! configuration and seed produce byte-identical outputs. Sweeps may run on
//! multiple threads (RAYON_NUM_THREADS overrides the worker count); results
//! do not depend on it.

mod commands;
mod config;
mod error;

use clap::{Parser, Subcommand, ValueEnum};
use config::RunConfig;
use error::CliError;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "oipd",
    about = "Triplet spin spectra, dipolar fields, pulse-sequence simulation and curve fits for long-range optically-induced-polarization sensing",
    version
)]
struct Cli {
    /// TOML configuration file; omitted fields use the standard defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Energy levels and transition frequencies versus magnetic field (CSV).
    Levels(LevelsArgs),
    /// Local field-slopes of the two transitions at one field point.
    Slopes(SlopesArgs),
    /// Mean and fluctuating dipolar field of the configured sample.
    Field(FieldArgs),
    /// Detection-volume radii r_p and r_f for the half-space sample.
    Volume(VolumeArgs),
    /// Polarization and fluctuation contrasts versus sensor depth (CSV).
    Contrast(ContrastArgs),
    /// Simulated resonance spectrum over an MW1 frequency sweep (CSV).
    Spectrum(SpectrumArgs),
    /// Simulated relaxation experiment: peak amplitude versus interval (CSV).
    Relax(RelaxArgs),
    /// Simulated polarization buildup versus laser pulse length (CSV).
    Buildup(BuildupArgs),
    /// Least-squares fits of measured or synthetic CSV data.
    Fit(FitArgs),
    /// One-line overview of the configured operating point.
    Summary,
}

#[derive(clap::Args)]
pub struct LevelsArgs {
    /// Sweep start (G).
    #[arg(long, default_value_t = 0.0)]
    pub b_start: f64,
    /// Sweep end (G).
    #[arg(long, default_value_t = 600.0)]
    pub b_end: f64,
    #[arg(long, default_value_t = 601)]
    pub points: usize,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(clap::Args)]
pub struct SlopesArgs {
    /// Field at which to evaluate the slopes (G).
    #[arg(long, default_value_t = 500.0)]
    pub b0: f64,
    /// Central finite-difference step (G).
    #[arg(long, default_value_t = 0.1)]
    pub db: f64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct FieldArgs {
    /// Also run the adaptive numeric integration alongside the closed forms.
    #[arg(long)]
    pub numeric: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct VolumeArgs {
    /// Fraction of the total signal defining the detection volume.
    #[arg(long, default_value_t = 0.80)]
    pub fraction: f64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct ContrastArgs {
    /// Smallest depth (um).
    #[arg(long, default_value_t = 0.05)]
    pub d_start: f64,
    /// Largest depth (um).
    #[arg(long, default_value_t = 100.0)]
    pub d_end: f64,
    /// Number of log-spaced depths.
    #[arg(long, default_value_t = 61)]
    pub points: usize,
    /// Comma-separated polarizations for the PS columns.
    #[arg(long, default_value = "0.1,0.0001")]
    pub p_list: String,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(clap::Args)]
pub struct SpectrumArgs {
    /// Sweep start (MHz); defaults to resonance - 100.
    #[arg(long)]
    pub f_start: Option<f64>,
    /// Sweep end (MHz); defaults to resonance + 100.
    #[arg(long)]
    pub f_end: Option<f64>,
    #[arg(long, default_value_t = 81)]
    pub points: usize,
    /// Additive Gaussian noise on the contrast.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(clap::Args)]
pub struct RelaxArgs {
    /// Which sublevel decay the interval probes: plus or zero.
    #[arg(long)]
    pub channel: String,
    #[arg(long, default_value_t = 0.0)]
    pub tau_start: f64,
    #[arg(long, default_value_t = 30.0)]
    pub tau_end: f64,
    #[arg(long, default_value_t = 16)]
    pub points: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(clap::Args)]
pub struct BuildupArgs {
    #[arg(long, default_value_t = 0.0)]
    pub tau_p_start: f64,
    #[arg(long, default_value_t = 6.0)]
    pub tau_p_end: f64,
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FitModelKind {
    Lorentzian,
    Exponential,
    DepthProfile,
    /// Orientation fit; the input abscissa is the signed field, the sign
    /// selecting the transition branch.
    FieldDependence,
}

#[derive(clap::Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: FitModelKind,
    /// CSV input: one header line, then x,y[,sigma].
    #[arg(long, short)]
    pub input: PathBuf,
    /// key=value report file.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Depth-profile only: propagate nuisance widths by Monte Carlo.
    #[arg(long)]
    pub propagate: bool,
    /// 1-sigma width of the effective accumulation time (us).
    #[arg(long, default_value_t = 1.0)]
    pub width_t: f64,
    /// 1-sigma width of the cylinder radius (um).
    #[arg(long, default_value_t = 5.0)]
    pub width_r0: f64,
    /// 1-sigma width of the cylinder thickness (um).
    #[arg(long, default_value_t = 3.0)]
    pub width_h: f64,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Levels(args) => commands::run_levels(&config, args),
        Command::Slopes(args) => commands::run_slopes(&config, args),
        Command::Field(args) => commands::run_field(&config, args),
        Command::Volume(args) => commands::run_volume(&config, args),
        Command::Contrast(args) => commands::run_contrast(&config, args),
        Command::Spectrum(args) => commands::run_spectrum(&config, args),
        Command::Relax(args) => commands::run_relax(&config, args),
        Command::Buildup(args) => commands::run_buildup(&config, args),
        Command::Fit(args) => commands::run_fit(&config, args),
        Command::Summary => commands::run_summary(&config),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
