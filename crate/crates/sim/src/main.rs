use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use sparse_exchange_sim::commands::{cmd_ensemble, cmd_run, cmd_sweep};
use sparse_exchange_sim::solve::{cmd_solve, load_endowments, Method, SolveOptions, SolveStatus};
use sparse_exchange_sim::ScenarioFile;

#[derive(Parser)]
#[command(
    name = "sparse-exchange",
    version,
    about = "Sparse proportional-response exchange experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; writes metrics.csv, allocation.json and graph.dot.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the scenario once per random-init seed; writes ensemble.csv and summary.csv.
    Ensemble {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        runs: u64,
        /// First seed; runs use seed..seed+runs-1.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the scenario once per penalty weight c; writes sweep.csv.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated c values.
        #[arg(long, value_delimiter = ',', required = true)]
        c_grid: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a centralized baseline; writes solution.json.
    Solve {
        /// Text file of endowments separated by whitespace or commas.
        #[arg(long)]
        endowments: PathBuf,
        #[arg(long)]
        theta: f64,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        /// p1: perturbation seed (off by default). p2: first-anchor seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        max_outer: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    P0,
    P1,
    P2,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::P0 => Method::P0,
            MethodArg::P1 => Method::P1,
            MethodArg::P2 => Method::P2,
        }
    }
}

fn load(path: &Path) -> Result<ScenarioFile> {
    ScenarioFile::load(path).context("loading scenario")
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, out } => {
            let outcome = cmd_run(&load(&scenario)?, &out)?;
            let m = outcome.final_metrics();
            println!(
                "t={} cardinality={} reciprocity={} min_ratio={:.6} d_ra={:.6e} converged={}",
                m.t, m.cardinality, m.reciprocity, m.min_ratio, m.d_ra, outcome.converged
            );
        }
        Command::Ensemble {
            scenario,
            runs,
            seed,
            jobs,
            out,
        } => {
            let rows = cmd_ensemble(&load(&scenario)?, runs, seed, jobs, &out)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            println!("{} runs, {} failed", rows.len(), failed);
        }
        Command::Sweep {
            scenario,
            c_grid,
            jobs,
            out,
        } => {
            for row in cmd_sweep(&load(&scenario)?, &c_grid, jobs, &out)? {
                println!(
                    "c={} cardinality={} d_ra={:.6e} min_ratio={:.6} iterations={}",
                    row.c, row.cardinality, row.d_ra, row.min_ratio, row.iterations
                );
            }
        }
        Command::Solve {
            endowments,
            theta,
            method,
            eps,
            seed,
            max_outer,
            out,
        } => {
            let a = load_endowments(&endowments)?;
            let mut opts = SolveOptions::new(theta, method.into());
            opts.eps = eps;
            opts.seed = seed;
            opts.max_outer = max_outer;
            let sol = cmd_solve(&a, &opts, &out)?;
            match sol.status {
                SolveStatus::Solved => println!("cardinality={}", sol.cardinality.unwrap_or(0)),
                SolveStatus::Infeasible => println!("infeasible: {}", sol.message.unwrap_or_default()),
            }
        }
    }
    Ok(())
}
