//! `spheroidal`: solve, verify and simulate equilibrium measures of
//! anisotropic Coulomb energies from the command line.
//!
//! Exit status: 0 on success, 1 when a verification runs but fails, 2 for
//! invalid configuration or I/O problems, 3 for numerical failures.

// Range checks are written `!(x > lo)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SPHEROIDAL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "spheroidal",
    version,
    about = "Equilibrium measures of anisotropic Coulomb energies"
)]
struct Cli {
    /// Write the artifact here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the equilibrium spheroid (JSON).
    Solve(SolveArgs),
    /// Solve over a grid of alpha values (CSV).
    Sweep(SweepArgs),
    /// Potentials on an (x1, r) grid (CSV).
    PotentialMap(MapArgs),
    /// Euler–Lagrange verification report (JSON).
    Verify(VerifyArgs),
    /// Particle gradient flow and shape fit (JSON, optional CSV snapshot).
    Simulate(SimulateArgs),
    /// The alpha -> -1 limit shape and convergence table (JSON).
    Limit(LimitArgs),
    /// Real-space versus Fourier-space energy of a smooth bump (JSON).
    Parseval(ParsevalArgs),
}

#[derive(Debug, Args, Clone, Serialize)]
struct ModelArgs {
    /// Space dimension.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Anisotropy strength.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    alpha: f64,
}

#[derive(Debug, Args, Serialize)]
struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// Largest accepted residual of the stationarity equation.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, allow_negative_numbers = true, default_value_t = -0.9)]
    alpha_min: f64,
    /// Defaults to n - 2.
    #[arg(long, allow_negative_numbers = true)]
    alpha_max: Option<f64>,
    #[arg(long, default_value_t = 30)]
    steps: usize,
}

#[derive(Debug, Args, Serialize)]
struct MapArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// Semi-axis along x1; with --b, maps this spheroid instead of the equilibrium.
    #[arg(long, requires = "b")]
    a: Option<f64>,
    #[arg(long, requires = "a")]
    b: Option<f64>,
    /// Half-width of the grid in units of max(a, b).
    #[arg(long, default_value_t = 2.0)]
    extent: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 41)]
    steps: usize,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// Verify a solution written by `solve` instead of solving.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Acceptance tolerance of the checks.
    #[arg(long, default_value_t = 1e-6)]
    el_tol: f64,
    #[arg(long, default_value_t = 2000)]
    interior_points: usize,
    #[arg(long, default_value_t = 400)]
    z_points: usize,
    /// Upper end of the z-grid in units of a/c.
    #[arg(long, default_value_t = 10.0)]
    z_max_factor: f64,
    #[arg(long, default_value_t = 41)]
    smoke_steps: usize,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// Number of particles.
    #[arg(long, default_value_t = 500)]
    particles: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_iterations: usize,
    /// Relative energy decrease over 100 steps that counts as converged.
    #[arg(long, default_value_t = 1e-9)]
    rel_decrease: f64,
    /// Write the final point cloud here as CSV.
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct LimitArgs {
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Offsets eps for the table t(-1 + eps).
    #[arg(long, value_delimiter = ',', default_values_t = vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5])]
    eps: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
struct ParsevalArgs {
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    alpha: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 32)]
    grid: usize,
    /// Box side in units of the support diameter.
    #[arg(long, default_value_t = 4.0)]
    box_factor: f64,
    /// Relative gap above which a warning is attached.
    #[arg(long, default_value_t = 1e-2)]
    bound: f64,
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("could not configure {threads} threads: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::PotentialMap(a) => commands::potential_map(a),
        Command::Verify(a) => commands::verify(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Limit(a) => commands::limit(a),
        Command::Parseval(a) => commands::parseval(a),
    };
    let outcome = match result {
        Ok(outcome) => outcome,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(err.exit_code());
        }
    };
    if let Err(err) = output::emit(&outcome.artifact, cli.output.as_deref()) {
        eprintln!("error: {err}");
        return ExitCode::from(2);
    }
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
