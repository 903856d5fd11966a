//! `varspline`: exact solves, discrete minimization, verification and cylinder experiments.

mod commands;
mod error;
mod io;
mod problem_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{parse_r, Common, MinimizeArgs, Status};
use crate::io::Format;

#[derive(Parser, Debug)]
#[command(name = "varspline", version, about = "Variational interpolating splines on model manifolds")]
struct Cli {
    /// Write the table here and the report to `<path>.meta.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output rendering on stdout when `--out` is absent.
    #[arg(long, global = true, value_enum, default_value = "table")]
    format: Format,
    /// Seed for randomized starting curves.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a flat problem exactly by piecewise polynomials.
    SolveExact {
        problem: PathBuf,
        /// Spline order, overriding the file.
        #[arg(long)]
        k: Option<usize>,
        /// Number of sampling intervals in the output table.
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Minimize the discrete spline energy on a uniform grid.
    Minimize {
        problem: PathBuf,
        /// Grid intervals M.
        #[arg(long)]
        grid: Option<usize>,
        /// Gradient tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Check a curve or polynomial against the spline conditions of a problem.
    Verify {
        problem: PathBuf,
        /// Curve table written by `minimize`.
        #[arg(long, conflicts_with = "poly")]
        curve: Option<PathBuf>,
        /// Report written by `solve-exact`.
        #[arg(long)]
        poly: Option<PathBuf>,
    },
    /// Winding-class experiments on the flat cylinder.
    #[command(subcommand)]
    Cylinder(CylinderCommand),
}

#[derive(Args, Debug)]
struct RArg {
    /// Middle knot time; `golden` is (√5 − 1)/2.
    #[arg(long, default_value = "golden", value_parser = parse_r)]
    r: f64,
}

#[derive(Subcommand, Debug)]
enum CylinderCommand {
    /// Best winding class for k0 up to K along a doubling schedule.
    Sequence {
        #[command(flatten)]
        r: RArg,
        #[arg(long = "K", default_value_t = 10_000)]
        k_max: i64,
    },
    /// Exact energies over a square window of classes.
    Scan {
        #[command(flatten)]
        r: RArg,
        /// Prescribed initial velocity, or `none`.
        #[arg(long, default_value = "0", value_parser = parse_v)]
        v: Velocity,
        #[arg(long, default_value_t = 10)]
        window: i64,
    },
    /// Bump-perturbed lines with natural and periodic ends.
    NaturalPeriodic {
        #[command(flatten)]
        r: RArg,
        #[arg(long = "K", default_value_t = 10_000)]
        k_max: i64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
}

#[derive(Debug, Clone, Copy)]
struct Velocity(Option<f64>);

fn parse_v(s: &str) -> Result<Velocity, String> {
    if s.eq_ignore_ascii_case("none") {
        Ok(Velocity(None))
    } else {
        s.parse::<f64>().map(|v| Velocity(Some(v))).map_err(|e| e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = Common {
        out: cli.out,
        format: cli.format,
        seed: cli.seed,
    };
    let result = match cli.command {
        Command::SolveExact { problem, k, samples } => commands::solve_exact_cmd(&common, &problem, k, samples),
        Command::Minimize { problem, grid, tol, max_iter } => {
            commands::minimize_cmd(&common, &problem, &MinimizeArgs { grid, tol, max_iter })
        }
        Command::Verify { problem, curve, poly } => {
            commands::verify_cmd(&common, &problem, curve.as_deref(), poly.as_deref())
        }
        Command::Cylinder(c) => match c {
            CylinderCommand::Sequence { r, k_max } => commands::sequence_cmd(&common, r.r, k_max),
            CylinderCommand::Scan { r, v, window } => commands::scan_cmd(&common, r.r, v.0, window),
            CylinderCommand::NaturalPeriodic { r, k_max, delta } => {
                commands::natural_periodic_cmd(&common, r.r, k_max, delta)
            }
        },
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!("{}", io::error_document(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
