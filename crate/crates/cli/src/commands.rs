//! The three subcommands. Tuples run in parallel; results are merged in sorted key order.

use std::path::{Path, PathBuf};

use ader_core::ader::{run, Variant};
use ader_core::environments::{make_contraction, make_lowerbound_instance, Contraction};
use ader_core::geometry::FeasibleSet;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiment::{algorithm_config_for, run_tuple, tuples, SummaryRow, SUMMARY_COLUMNS};
use crate::output::{fmt_float, fmt_opt, write_atomic, write_json, CsvTable};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "ADER_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "ader-out";

/// `explicit`, else `$ADER_OUT_DIR`, else `./ader-out`.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))
}

/// Runs every tuple and returns the summary rows in sorted tuple order.
pub fn run_all(config: &ExperimentConfig, jobs: usize, trace_dir: Option<&Path>) -> Result<Vec<SummaryRow>, CliError> {
    let keys = tuples(config);
    let results: Vec<_> = pool(jobs)?.install(|| keys.par_iter().map(|k| run_tuple(k, config, trace_dir)).collect());
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

fn summary_table(rows: &[SummaryRow]) -> CsvTable {
    let mut t = CsvTable::new(SUMMARY_COLUMNS);
    for r in rows {
        t.push(r.fields());
    }
    t
}

fn check_slack(rows: &[SummaryRow]) -> Result<(), CliError> {
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| r.slack.is_nan() || r.slack < 0.0)
        .map(|r| format!("{}/{}/T={}/seed={}/{}", r.algorithm, r.environment, r.horizon, r.seed, r.comparator))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("regret exceeds the bound for: {}", bad.join(", "))))
    }
}

fn write_summary(dir: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    write_atomic(&dir.join("summary.csv"), summary_table(rows).render().as_bytes())?;
    write_json(&dir.join("summary.json"), rows)
}

/// Writes `traces/<tuple>.csv`, `summary.csv` and `summary.json` under `out`.
pub fn cmd_run(config: &ExperimentConfig, jobs: usize, out: &Path) -> Result<Vec<SummaryRow>, CliError> {
    let trace_dir = out.join("traces");
    let rows = run_all(config, jobs, Some(&trace_dir))?;
    write_summary(out, &rows)?;
    check_slack(&rows)?;
    Ok(rows)
}

pub const SWEEP_COLUMNS: [&str; 9] = [
    "algorithm",
    "environment",
    "comparator",
    "seed",
    "T",
    "P_T",
    "regret",
    "bound",
    "ratio",
];

pub fn sweep_table(rows: &[SummaryRow]) -> CsvTable {
    let mut t = CsvTable::new(SWEEP_COLUMNS);
    for r in rows {
        t.push(vec![
            r.algorithm.clone(),
            r.environment.clone(),
            r.comparator.clone(),
            r.seed.to_string(),
            r.horizon.to_string(),
            fmt_float(r.path_length),
            fmt_float(r.regret),
            fmt_float(r.bound),
            fmt_float(r.ratio),
        ]);
    }
    t
}

/// Like [`cmd_run`] over a horizon grid, without per-round traces; adds `sweep.csv`.
pub fn cmd_sweep(config: &ExperimentConfig, jobs: usize, out: &Path) -> Result<Vec<SummaryRow>, CliError> {
    let mut distinct = config.horizons.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(CliError::Usage(format!(
            "sweep needs at least two distinct horizons, got {:?}",
            config.horizons
        )));
    }
    let rows = run_all(config, jobs, None)?;
    write_summary(out, &rows)?;
    write_atomic(&out.join("sweep.csv"), sweep_table(&rows).render().as_bytes())?;
    check_slack(&rows)?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct LowerBoundParams {
    pub horizon: usize,
    pub tau: f64,
    pub seeds: usize,
    pub first_seed: u64,
    pub dim: usize,
    pub diameter: f64,
    pub gradient_bound: f64,
    pub algorithms: Vec<Variant>,
}

/// Aggregate over seeds for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundRow {
    pub algorithm: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub tau: f64,
    pub seeds: usize,
    pub mean_realized_tau: f64,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub mean_bound: f64,
    pub min_slack: f64,
    /// `G√(T(D² + Dτ))`
    pub reference: f64,
    pub ratio: f64,
    /// `G√(TDτ)`, zero when `τ = 0`.
    pub reference_tau: f64,
    pub ratio_tau: Option<f64>,
}

pub const LOWER_BOUND_COLUMNS: [&str; 13] = [
    "algorithm",
    "T",
    "tau",
    "seeds",
    "mean_realized_tau",
    "mean_regret",
    "std_regret",
    "mean_bound",
    "min_slack",
    "reference",
    "ratio",
    "reference_tau",
    "ratio_tau",
];

impl LowerBoundRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.algorithm.clone(),
            self.horizon.to_string(),
            fmt_float(self.tau),
            self.seeds.to_string(),
            fmt_float(self.mean_realized_tau),
            fmt_float(self.mean_regret),
            fmt_float(self.std_regret),
            fmt_float(self.mean_bound),
            fmt_float(self.min_slack),
            fmt_float(self.reference),
            fmt_float(self.ratio),
            fmt_float(self.reference_tau),
            fmt_opt(self.ratio_tau),
        ]
    }
}

struct SeedOutcome {
    realized_tau: f64,
    /// `(regret, bound)` per algorithm, in `params.algorithms` order.
    scores: Vec<(f64, f64)>,
}

fn lowerbound_seed(p: &LowerBoundParams, seed: u64) -> Result<SeedOutcome, CliError> {
    let set = FeasibleSet::ball(p.dim, p.diameter)?;
    let inst = make_lowerbound_instance(p.horizon, p.tau, &set, p.gradient_bound, seed)?;
    let identity = make_contraction(Contraction::Identity, &set)?;
    let mut scores = Vec::with_capacity(p.algorithms.len());
    for &variant in &p.algorithms {
        let alg = algorithm_config_for(variant, &set, &inst.losses, Some(&identity))?;
        let mut trace = run(&inst.losses.rounds, &alg, &set).map_err(|e| CliError::from(e).context(&format!("{variant} seed {seed}")))?;
        let report = trace.register_comparator("block-best", &inst.comparator, &inst.losses.rounds)?;
        scores.push((report.regret, report.bound));
    }
    Ok(SeedOutcome {
        realized_tau: inst.realized_tau,
        scores,
    })
}

/// Runs every algorithm on `seeds` lower-bound instances and aggregates the regret
/// against each instance's block-best comparator.
pub fn cmd_lowerbound(p: &LowerBoundParams, jobs: usize, out: &Path) -> Result<Vec<LowerBoundRow>, CliError> {
    if p.seeds == 0 {
        return Err(CliError::Usage("lower-bound needs at least one seed".into()));
    }
    if p.horizon == 0 {
        return Err(CliError::Usage("horizon T must be at least 1".into()));
    }
    if p.algorithms.is_empty() {
        return Err(CliError::Usage("no algorithms selected".into()));
    }
    let max_tau = p.horizon as f64 * p.diameter;
    if !(p.tau.is_finite() && (0.0..=max_tau).contains(&p.tau)) {
        return Err(CliError::Usage(format!("tau must lie in [0, T*D] = [0, {max_tau}], got {}", p.tau)));
    }
    let seeds: Vec<u64> = (0..p.seeds as u64).map(|i| p.first_seed.wrapping_add(i)).collect();
    let outcomes: Vec<_> = pool(jobs)?.install(|| seeds.par_iter().map(|&s| lowerbound_seed(p, s)).collect());
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;

    let n = outcomes.len() as f64;
    let (t, d, g) = (p.horizon as f64, p.diameter, p.gradient_bound);
    let reference = g * (t * (d * d + d * p.tau)).sqrt();
    let reference_tau = g * (t * d * p.tau).sqrt();
    let mean_realized_tau = outcomes.iter().map(|o| o.realized_tau).sum::<f64>() / n;
    let rows: Vec<LowerBoundRow> = p
        .algorithms
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let regrets: Vec<f64> = outcomes.iter().map(|o| o.scores[i].0).collect();
            let mean = regrets.iter().sum::<f64>() / n;
            let var = regrets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
            LowerBoundRow {
                algorithm: v.name().to_string(),
                horizon: p.horizon,
                tau: p.tau,
                seeds: p.seeds,
                mean_realized_tau,
                mean_regret: mean,
                std_regret: var.sqrt(),
                mean_bound: outcomes.iter().map(|o| o.scores[i].1).sum::<f64>() / n,
                min_slack: outcomes
                    .iter()
                    .map(|o| o.scores[i].1 - o.scores[i].0)
                    .fold(f64::INFINITY, f64::min),
                reference,
                ratio: mean / reference,
                reference_tau,
                ratio_tau: (reference_tau > 0.0).then(|| mean / reference_tau),
            }
        })
        .collect();

    let mut table = CsvTable::new(LOWER_BOUND_COLUMNS);
    for r in &rows {
        table.push(r.fields());
    }
    write_atomic(&out.join("lowerbound.csv"), table.render().as_bytes())?;
    write_json(&out.join("lowerbound.json"), &rows)?;
    if let Some(r) = rows.iter().find(|r| r.min_slack.is_nan() || r.min_slack < 0.0) {
        return Err(CliError::Runtime(format!("{} exceeded its regret bound on some seed", r.algorithm)));
    }
    Ok(rows)
}
