//! Experiment harness around `ader-core`: JSON-configured runs, horizon sweeps and
//! the lower-bound experiment, each writing plot-ready CSV/JSON tables.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

use std::path::PathBuf;

use ader_core::ader::Variant;
use clap::{Args, Parser, Subcommand};

use crate::commands::{cmd_lowerbound, cmd_run, cmd_sweep, output_root, LowerBoundParams};
use crate::config::{ExperimentConfig, Overrides};
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ader", version, about = "Adaptive online gradient descent experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every (algorithm, environment, T, seed) tuple; write traces and a summary.
    Run(ExperimentArgs),
    /// Run a horizon grid and write the regret/√(T(1+P_T)) table.
    Sweep(ExperimentArgs),
    /// Mean regret of each algorithm on randomized lower-bound instances.
    LowerBound(LowerBoundArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// JSON experiment config; flags below override its entries.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long = "algo", value_name = "NAME", num_args = 1..)]
    pub algorithms: Vec<Variant>,
    #[arg(long = "t", value_name = "N", num_args = 1..)]
    pub horizons: Vec<usize>,
    #[arg(long, value_name = "N")]
    pub dim: Option<usize>,
    #[arg(long = "seed", value_name = "N", num_args = 1..)]
    pub seeds: Vec<u64>,
    /// Path-length budget for lower-bound environments.
    #[arg(long, value_name = "X")]
    pub tau: Option<f64>,
    /// Output directory [default: $ADER_OUT_DIR, else ./ader-out]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct LowerBoundArgs {
    #[arg(long = "t", value_name = "N", default_value_t = 4096)]
    pub horizon: usize,
    #[arg(long, value_name = "X", default_value_t = 0.0)]
    pub tau: f64,
    /// Number of random instances.
    #[arg(long, value_name = "N", default_value_t = 50)]
    pub seeds: usize,
    /// First seed; instances use consecutive seeds from here.
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "N", default_value_t = 2)]
    pub dim: usize,
    #[arg(long, value_name = "D", default_value_t = 2.0)]
    pub diameter: f64,
    #[arg(long, value_name = "G", default_value_t = 1.0)]
    pub gradient_bound: f64,
    /// Algorithms to run [default: all]
    #[arg(long = "algo", value_name = "NAME", num_args = 1..)]
    pub algorithms: Vec<Variant>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub jobs: usize,
}

impl ExperimentArgs {
    /// Config file (or defaults) with the flags applied, validated.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        config.apply(&Overrides {
            algorithms: self.algorithms.clone(),
            horizons: self.horizons.clone(),
            dim: self.dim,
            seeds: self.seeds.clone(),
            tau: self.tau,
            out: self.out.clone(),
        });
        config.validated()
    }
}

/// Runs a parsed command; returns what to print on success.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Run(args) => {
            let config = args.resolve()?;
            let out = output_root(config.out.as_deref());
            let rows = cmd_run(&config, args.jobs, &out)?;
            let runs = experiment::tuples(&config).len();
            Ok(format!(
                "wrote {runs} trace file(s) and {} summary row(s) to {}",
                rows.len(),
                out.display()
            ))
        }
        Command::Sweep(args) => {
            let config = args.resolve()?;
            let out = output_root(config.out.as_deref());
            let rows = cmd_sweep(&config, args.jobs, &out)?;
            let mut text = format!(
                "{:<16} {:<20} {:<20} {:>6} {:>8} {:>12} {:>12} {:>12} {:>10}\n",
                "algorithm", "environment", "comparator", "seed", "T", "P_T", "regret", "bound", "ratio"
            );
            for r in &rows {
                text.push_str(&format!(
                    "{:<16} {:<20} {:<20} {:>6} {:>8} {:>12.4} {:>12.4} {:>12.4} {:>10.4}\n",
                    r.algorithm, r.environment, r.comparator, r.seed, r.horizon, r.path_length, r.regret, r.bound, r.ratio
                ));
            }
            text.push_str(&format!("tables written to {}", out.display()));
            Ok(text)
        }
        Command::LowerBound(args) => {
            let params = LowerBoundParams {
                horizon: args.horizon,
                tau: args.tau,
                seeds: args.seeds,
                first_seed: args.seed,
                dim: args.dim,
                diameter: args.diameter,
                gradient_bound: args.gradient_bound,
                algorithms: if args.algorithms.is_empty() {
                    Variant::ALL.to_vec()
                } else {
                    args.algorithms.clone()
                },
            };
            let out = output_root(args.out.as_deref());
            let rows = cmd_lowerbound(&params, args.jobs, &out)?;
            let mut text = format!(
                "{:<16} {:>12} {:>12} {:>12} {:>10} {:>10}\n",
                "algorithm", "mean_regret", "std_regret", "reference", "ratio", "ratio_tau"
            );
            for r in &rows {
                text.push_str(&format!(
                    "{:<16} {:>12.4} {:>12.4} {:>12.4} {:>10.4} {:>10}\n",
                    r.algorithm,
                    r.mean_regret,
                    r.std_regret,
                    r.reference,
                    r.ratio,
                    r.ratio_tau.map_or("-".to_string(), |x| format!("{x:.4}"))
                ));
            }
            text.push_str(&format!(
                "T={} tau={} seeds={}; tables written to {}",
                params.horizon,
                params.tau,
                params.seeds,
                out.display()
            ));
            Ok(text)
        }
    }
}
