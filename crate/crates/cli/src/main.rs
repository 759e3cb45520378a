use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use kpzlab::bridges::Point;
use kpzlab::wedge::bessel::bessel_i;
use kpzlab::wedge::{wedge_kernel, KernelQuery};
use kpzlab_cli::config::parse_config;
use kpzlab_cli::experiments::run_experiment;
use kpzlab_cli::report::report;

/// Numerical experiments for KPZ on a torus.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on errors.
/// The root seed of `run` can be overridden with KPZLAB_SEED.
#[derive(Parser)]
#[command(name = "kpzlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write its CSV and summary.
    Run { config: PathBuf },
    /// Fit exponents from result CSVs and compare with the predictions.
    Report {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
    /// Killed transition density of the wedge shifted by a along h.
    KernelEval {
        #[arg(long)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        r1: f64,
        #[arg(long, allow_negative_numbers = true)]
        theta1: f64,
        #[arg(long, allow_negative_numbers = true)]
        r2: f64,
        #[arg(long, allow_negative_numbers = true)]
        theta2: f64,
        /// Wedge offset; `inf` gives the free kernel.
        #[arg(long, default_value_t = 0.0)]
        a: f64,
    },
    /// Modified Bessel function I_nu(z), series checked against quadrature.
    Bessel {
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        z: f64,
    },
}

fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = parse_config(&text)?;
            let summary = run_experiment(&cfg)?;
            for c in &summary.checks {
                println!(
                    "{} {}: measured {} target {} tol {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.target,
                    c.tolerance
                );
            }
            for f in &summary.fits {
                println!("fit {}: slope {} +/- {}", f.label, f.slope, f.slope_halfwidth);
            }
            println!("wrote {} ({} rows, {:.1} s)", summary.output_path, summary.rows, summary.wall_time_seconds);
            Ok(summary.passed)
        }
        Command::Report { csv } => {
            let rep = report(&csv)?;
            print!("{rep}");
            Ok(rep.passed())
        }
        Command::KernelEval { x, r1, theta1, r2, theta2, a } => {
            let q = KernelQuery::offset(x, Point::from_polar(r1, theta1), Point::from_polar(r2, theta2), a);
            println!("{}", wedge_kernel(&q)?);
            Ok(true)
        }
        Command::Bessel { nu, z } => {
            println!("{}", bessel_i(nu, z)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
