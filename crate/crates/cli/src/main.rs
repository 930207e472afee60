//! `eprsim`: synthetic homodyne sweeps, tomography, fitting and design
//! arithmetic for two-crystal EPR-state synthesis.

mod commands;
mod design;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::commands::CliError;

/// Environment variable that overrides the default output directory.
pub const OUT_DIR_ENV: &str = "EPRSIM_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "eprsim", version, about = "EPR-state synthesis simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a lossy single-mode squeezed vacuum under a swept LO and fit
    /// the variance trace.
    SingleSweep(Run<SingleSweep>),
    /// Sample the two-mode pipeline output and fit the sum/difference traces.
    EprSweep(Run<EprSweep>),
    /// Reconstruct a density matrix from a quadrature dataset.
    Tomography(Run<Tomography>),
    /// Fit variance traces read from CSV.
    Fit(Run<Fit>),
    /// Beam-geometry and walk-off calculations, printed as JSON rows.
    Design(design::DesignArgs),
    /// Re-run the invocation recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Args, Debug)]
struct OutDir {
    /// Output directory.
    #[arg(long = "out", env = OUT_DIR_ENV, default_value = ".")]
    dir: PathBuf,
}

#[derive(Args, Debug)]
struct Run<T: Args> {
    #[command(flatten)]
    params: T,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleSweep {
    /// Squeezing parameter ζ.
    #[arg(long, default_value_t = 0.44)]
    pub zeta: f64,
    /// Detection efficiency η.
    #[arg(long, default_value_t = 0.52)]
    pub eta: f64,
    /// Number of homodyne records.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    /// Records per variance bin.
    #[arg(long, default_value_t = eprsim_core::homodyne::DEFAULT_WINDOW)]
    pub window: usize,
    /// LO phase at the first record, radians.
    #[arg(long, default_value_t = 0.0)]
    pub theta0: f64,
    /// Total LO phase swept over the run, radians.
    #[arg(long, default_value_t = 3.0 * std::f64::consts::PI)]
    pub sweep: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write the raw quadrature records.
    #[arg(long)]
    pub write_dataset: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EprSweep {
    #[arg(long, default_value_t = 0.44)]
    pub zeta: f64,
    #[arg(long, default_value_t = 0.50)]
    pub eta: f64,
    /// Phase between the two squeezed inputs, radians (π/2 is ideal).
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub relative_phase: f64,
    /// Vacuum admixture into the second input (0 is perfect overlap).
    #[arg(long, default_value_t = 0.0)]
    pub mismatch: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = eprsim_core::homodyne::DEFAULT_WINDOW)]
    pub window: usize,
    /// Total phase swept by the first LO, radians.
    #[arg(long, default_value_t = 4.0 * std::f64::consts::PI)]
    pub sweep: f64,
    /// Total phase swept by the second LO, radians.
    #[arg(long, default_value_t = 0.0)]
    pub sweep2: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub write_dataset: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tomography {
    /// Quadrature dataset CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Fock cutoff per mode.
    #[arg(long, default_value_t = 4)]
    pub cutoff: usize,
    /// Relative log-likelihood gain that ends the iteration.
    #[arg(long, default_value_t = 1e-8)]
    pub stop_tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
    /// ζ of the reference state for fidelity reporting.
    #[arg(long, requires = "reference_eta")]
    pub reference_zeta: Option<f64>,
    /// η of the reference state for fidelity reporting.
    #[arg(long, requires = "reference_zeta")]
    pub reference_eta: Option<f64>,
    /// Single-threaded reference reduction.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[group(required = true, multiple = false)]
pub struct Fit {
    /// Single-mode variance trace.
    #[arg(long, value_name = "TRACE")]
    pub single: Option<PathBuf>,
    /// Sum and difference traces of a two-mode sweep.
    #[arg(long, num_args = 2, value_names = ["SUM", "DIFFERENCE"])]
    pub epr: Option<Vec<PathBuf>>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SingleSweep(r) => {
            commands::execute(&manifest::Recipe::SingleSweep(r.params), &r.out.dir)
        }
        Command::EprSweep(r) => {
            commands::execute(&manifest::Recipe::EprSweep(r.params), &r.out.dir)
        }
        Command::Tomography(r) => {
            commands::execute(&manifest::Recipe::Tomography(r.params), &r.out.dir)
        }
        Command::Fit(r) => commands::execute(&manifest::Recipe::Fit(r.params), &r.out.dir),
        Command::Design(args) => design::run(&args),
        Command::Replay { manifest, out } => {
            let m = manifest::RunManifest::read(&manifest)?;
            commands::execute(&m.recipe, &out.dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
