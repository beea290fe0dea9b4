//! `phonon`: batch front-end for the levitated-array toolkit.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phonon_core::lattice::CouplingTopology;
use phonon_core::scattering::Hopping;
use phonon_core::thermo::FrequencyProfile;

#[derive(Parser, Debug)]
#[command(
    name = "phonon",
    version,
    about = "Phonon dynamics in optically bound nanosphere arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML config; the built-in reference array when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Assert that the run uses no random numbers (all runs are deterministic).
    #[arg(long)]
    pub seedless: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pair binding force against separation and polarization angle.
    Forces {
        #[command(flatten)]
        common: Common,
        /// Separations `min:max:n` in wavelengths.
        #[arg(long, default_value = "0.5:5:451")]
        r_range: String,
        /// Comma-separated polarization angles in degrees.
        #[arg(long, default_value = "0,45,90", allow_hyphen_values = true)]
        theta: String,
    },
    /// Hopping matrix and dressed frequencies of the configured array.
    Couplings {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        coupling: Option<CouplingTopology>,
        /// Also tabulate the two-sphere coupling over spacings `min:max:n` (wavelengths).
        #[arg(long)]
        spacing_scan: Option<String>,
    },
    /// Population dynamics after a single-site kick.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        coupling: Option<CouplingTopology>,
        /// End time in units of 1/g_max.
        #[arg(long)]
        t_end: Option<f64>,
        /// Step in units of 1/g_max.
        #[arg(long)]
        dt: Option<f64>,
        /// Dump the full correlation matrix at every sample.
        #[arg(long)]
        snapshots: bool,
    },
    /// Asymmetry, time average, GGE comparison and plateau detection.
    Pretherm {
        #[command(flatten)]
        common: Common,
        /// Frequency profile: middle-lower, uniform or middle-higher.
        #[arg(long)]
        preset: Option<FrequencyProfile>,
        #[arg(long)]
        coupling: Option<CouplingTopology>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Reflection asymmetry map and zero-reflection locus.
    Scatter {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seedless: bool,
        /// `dmin:dmax:n,gmin:gmax:n` in units of g.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long, default_value = "nearest")]
        hopping: Hopping,
        #[arg(long, default_value_t = 30.0)]
        eta_max: f64,
        /// Upper end of the Gamma bracket searched for zero reflection.
        #[arg(long, default_value_t = 10.0)]
        gamma_max: f64,
    },
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<phonon_core::Error> for Failure {
    fn from(e: phonon_core::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("PHONON_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        Failure::Usage(format!(
            "PHONON_THREADS must be a positive integer, got '{v}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Forces {
            common,
            r_range,
            theta,
        } => commands::forces(&common, &r_range, &theta),
        Command::Couplings {
            common,
            coupling,
            spacing_scan,
        } => commands::couplings(&common, coupling, spacing_scan.as_deref()),
        Command::Evolve {
            common,
            coupling,
            t_end,
            dt,
            snapshots,
        } => commands::evolve(&common, coupling, t_end, dt, snapshots),
        Command::Pretherm {
            common,
            preset,
            coupling,
            t_end,
        } => commands::pretherm(&common, preset, coupling, t_end),
        Command::Scatter {
            out,
            seedless: _,
            grid,
            hopping,
            eta_max,
            gamma_max,
        } => commands::scatter(&out, grid.as_deref(), hopping, eta_max, gamma_max),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
