//! `varlab`: runs threshold, hunt, branch, fixed-point and hypothesis
//! experiments from JSON configs and stores the artifacts in run directories.

mod commands;
mod config;
mod error;
mod run;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use config::*;
use error::CliError;
use run::RunDir;

#[derive(Parser)]
#[command(name = "varlab", version, about = "Sublevel-set variational experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `policy.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Base directory for run directories (default `runs`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the threshold quotient on a ρ grid.
    PhiCurve,
    /// Ladder of certified local minima at growing or shrinking levels.
    Hunt,
    /// Continue the positive solution branch as λ decreases.
    Bifurcate,
    /// Fixed point of a potential operator, with an optional sup-ratio scan.
    FixedPoint,
    /// Check hypotheses on user nonlinearities.
    Check,
    /// Saddle between two end points.
    MountainPass,
    /// Scan for quotient values below ½ on a superlinear Dirichlet model.
    Problem1,
    /// Dead-zone conditions without the ratio condition, plus a hunt.
    Problem3,
    /// Recompute the certificates of a finished run.
    Verify {
        /// Run directory to check.
        run_dir: PathBuf,
    },
}

trait RunConfig: DeserializeOwned + Serialize {
    fn policy_mut(&mut self) -> &mut Policy;
    fn out(&self) -> Option<&str>;
}

macro_rules! run_config {
    ($($t:ty),*) => {$(
        impl RunConfig for $t {
            fn policy_mut(&mut self) -> &mut Policy {
                &mut self.policy
            }
            fn out(&self) -> Option<&str> {
                self.out.as_deref()
            }
        }
    )*};
}

run_config!(
    PhiCurveConfig,
    HuntConfig,
    BifurcateConfig,
    FixedPointConfig,
    CheckConfig,
    MountainPassConfig,
    Problem1Config,
    Problem3Config
);

fn execute<C: RunConfig>(
    cli: &Cli,
    name: &str,
    body: impl FnOnce(&C, &mut RunDir) -> Result<commands::Done, CliError>,
) -> Result<ExitCode, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("missing --config".into()))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: C = from_json(&text)?;
    if let Some(seed) = cli.seed {
        cfg.policy_mut().seed = seed;
    }
    let base = cli
        .out
        .clone()
        .or_else(|| cfg.out().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(run::DEFAULT_BASE));
    let effective = serde_json::to_string_pretty(&cfg).expect("configs serialize");
    let mut run = RunDir::new(&base, name, effective);
    let done = body(&cfg, &mut run)?;
    let dir = run.finish(&done.summary, done.result)?;
    println!("{}", serde_json::to_string_pretty(&done.summary).expect("summaries serialize"));
    println!("run directory: {}", dir.display());
    if done.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("varlab: solver did not converge; flagged artifacts written to {}", dir.display());
        Ok(CliError::Numerical(String::new()).exit_code())
    }
}

fn verify_cmd(dir: &Path) -> Result<ExitCode, CliError> {
    let checks = verify::verify(dir)?;
    let mut all = true;
    for c in &checks {
        println!("{} {}: {}", if c.ok { "ok    " } else { "FAILED" }, c.what, c.detail);
        all &= c.ok;
    }
    println!("{} of {} certificates reproduce", checks.iter().filter(|c| c.ok).count(), checks.len());
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn dispatch(cli: &Cli) -> Result<ExitCode, CliError> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs as usize)
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    match &cli.command {
        Command::PhiCurve => execute(cli, "phi-curve", commands::phi_curve),
        Command::Hunt => execute(cli, "hunt", commands::hunt),
        Command::Bifurcate => execute(cli, "bifurcate", commands::bifurcate),
        Command::FixedPoint => execute(cli, "fixed-point", commands::fixed_point),
        Command::Check => execute(cli, "check", commands::check),
        Command::MountainPass => execute(cli, "mountain-pass", commands::mountain_pass_cmd),
        Command::Problem1 => execute(cli, "problem1", commands::problem1),
        Command::Problem3 => execute(cli, "problem3", commands::problem3),
        Command::Verify { run_dir } => verify_cmd(run_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("varlab: {e}");
            e.exit_code()
        }
    }
}
