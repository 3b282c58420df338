//! One run tuple: build the environment, run the learner, score the comparators.

use std::path::Path;

use ader_core::ader::{run, AlgorithmConfig, RegretTrace, Variant};
use ader_core::environments::{
    best_block_comparators, dynamic_path_length, generate, make_lowerbound_instance, make_model_tracking,
    BlockPartition, ComparatorSequence, DynamicalModel, EnvironmentSpec, Family, LossSequence,
};
use ader_core::geometry::{FeasibleSet, Vector};
use serde::Serialize;

use crate::config::{ComparatorSpec, EnvKind, EnvironmentConfig, ExperimentConfig};
use crate::error::CliError;
use crate::output::{fmt_float, fmt_opt, write_atomic, CsvTable};

/// A concrete loss sequence plus what the comparators need to know about it.
pub struct Instance {
    pub set: FeasibleSet,
    pub losses: LossSequence,
    pub model: Option<DynamicalModel>,
    /// Segmentation used by `block-best` when no block count is given.
    pub blocks: BlockPartition,
}

pub fn build_instance(
    env: &EnvironmentConfig,
    horizon: usize,
    dim: usize,
    diameter: f64,
    seed: u64,
) -> Result<Instance, CliError> {
    let set = FeasibleSet::ball(dim, diameter)?;
    let model = if env.model.is_empty() {
        None
    } else {
        Some(DynamicalModel::schedule(env.model.clone(), &set)?)
    };
    let spec = |family| EnvironmentSpec {
        drift: env.drift,
        switches: env.switches_at(horizon),
        tau: env.tau,
        gradient_bound: env.gradient_bound,
        ..EnvironmentSpec::new(family, horizon, dim, seed)
    };
    let (losses, blocks) = match env.family {
        EnvKind::QuadraticTracking => {
            let spec = spec(Family::QuadraticTracking);
            let losses = generate(&spec, &set)?;
            (losses, BlockPartition::even(horizon, spec.switches + 1)?)
        }
        EnvKind::LinearAdversary => (generate(&spec(Family::LinearAdversary), &set)?, BlockPartition::whole(horizon)?),
        EnvKind::LowerBound => {
            let inst = make_lowerbound_instance(horizon, env.tau, &set, env.gradient_bound, seed)?;
            (inst.losses, inst.blocks)
        }
        EnvKind::ModelTracking => {
            let model = model.as_ref().ok_or_else(|| CliError::Usage("model-tracking needs a model".into()))?;
            let start = match &env.start {
                Some(s) => Vector::new(s.clone())?,
                None => Vector::basis(dim, 0).scale(0.8 * set.radius()),
            };
            let (losses, _) = make_model_tracking(horizon, &set, model, &start)?;
            (losses, BlockPartition::singletons(horizon)?)
        }
    };
    Ok(Instance {
        set,
        losses,
        model,
        blocks,
    })
}

pub fn build_comparator(spec: &ComparatorSpec, inst: &Instance) -> Result<ComparatorSequence, CliError> {
    let rounds = &inst.losses.rounds;
    let t = rounds.len();
    let set = &inst.set;
    Ok(match spec {
        ComparatorSpec::ConstantBest => best_block_comparators(rounds, &BlockPartition::whole(t)?, set)?,
        ComparatorSpec::PerRoundMinimizer => best_block_comparators(rounds, &BlockPartition::singletons(t)?, set)?,
        ComparatorSpec::BlockBest { blocks: None } => best_block_comparators(rounds, &inst.blocks, set)?,
        ComparatorSpec::BlockBest { blocks: Some(b) } => {
            best_block_comparators(rounds, &BlockPartition::even(t, (*b).min(t))?, set)?
        }
        ComparatorSpec::FollowDynamics => {
            let model = inst
                .model
                .as_ref()
                .ok_or_else(|| CliError::Usage("follow-dynamics needs a model".into()))?;
            let first = best_block_comparators(&rounds[..1], &BlockPartition::whole(1)?, set)?;
            let mut u = first.points()[0].clone();
            let mut points = Vec::with_capacity(t);
            for round in 0..t {
                let next = model.apply(round, &u);
                points.push(std::mem::replace(&mut u, next));
            }
            ComparatorSequence::new(points, set)?
        }
        ComparatorSpec::Custom { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read comparator file {}: {e}", path.display())))?;
            let raw: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(|e| {
                CliError::Usage(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
            })?;
            if raw.len() < t {
                return Err(CliError::Usage(format!(
                    "comparator file {} has {} points, the horizon is {t}",
                    path.display(),
                    raw.len()
                )));
            }
            let points = raw
                .into_iter()
                .take(t)
                .map(|p| {
                    let v = Vector::new(p)?;
                    set.check_dim(&v)?;
                    Ok(v)
                })
                .collect::<Result<Vec<_>, ader_core::Error>>()
                .map_err(|e| CliError::from(e).context(&path.display().to_string()))?;
            ComparatorSequence::new(points, set).map_err(|e| CliError::from(e).context(&path.display().to_string()))?
        }
    })
}

/// Identifies one run; summaries are merged in this order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TupleKey {
    pub algorithm: String,
    pub environment: String,
    pub horizon: usize,
    pub seed: u64,
    pub variant: Variant,
    pub env_index: usize,
}

impl TupleKey {
    pub fn file_stem(&self) -> String {
        format!("{}__{}__T{}__seed{}", self.algorithm, self.environment, self.horizon, self.seed)
    }
}

/// All tuples of a config, sorted.
pub fn tuples(config: &ExperimentConfig) -> Vec<TupleKey> {
    let mut out = Vec::new();
    for &variant in &config.algorithms {
        for (env_index, env) in config.environments.iter().enumerate() {
            for &horizon in &config.horizons {
                for &seed in &config.seeds {
                    out.push(TupleKey {
                        algorithm: variant.name().to_string(),
                        environment: env.label().to_string(),
                        horizon,
                        seed,
                        variant,
                        env_index,
                    });
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// One line of `summary.csv` / `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub environment: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub seed: u64,
    pub comparator: String,
    pub regret: f64,
    pub path_length: f64,
    pub dynamic_path_length: Option<f64>,
    pub theorem: u8,
    pub bound: f64,
    pub slack: f64,
    /// `regret / √(T(1 + P_T))`
    pub ratio: f64,
    pub cumulative_loss: f64,
    pub grad_queries: u64,
    pub value_queries: u64,
}

pub const SUMMARY_COLUMNS: [&str; 15] = [
    "algorithm",
    "environment",
    "T",
    "seed",
    "comparator",
    "regret",
    "path_length",
    "dynamic_path_length",
    "theorem",
    "bound",
    "slack",
    "ratio",
    "cumulative_loss",
    "grad_queries",
    "value_queries",
];

impl SummaryRow {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.algorithm.clone(),
            self.environment.clone(),
            self.horizon.to_string(),
            self.seed.to_string(),
            self.comparator.clone(),
            fmt_float(self.regret),
            fmt_float(self.path_length),
            fmt_opt(self.dynamic_path_length),
            self.theorem.to_string(),
            fmt_float(self.bound),
            fmt_float(self.slack),
            fmt_float(self.ratio),
            fmt_float(self.cumulative_loss),
            self.grad_queries.to_string(),
            self.value_queries.to_string(),
        ]
    }
}

pub fn scaling_ratio(regret: f64, horizon: usize, path: f64) -> f64 {
    regret / (horizon as f64 * (1.0 + path)).sqrt()
}

/// Learner config for `variant` with constants from the instance; `model` is attached
/// for the variants that need one.
pub fn algorithm_config_for(
    variant: Variant,
    set: &FeasibleSet,
    losses: &LossSequence,
    model: Option<&DynamicalModel>,
) -> Result<AlgorithmConfig, CliError> {
    let alg = AlgorithmConfig::new(variant, losses.horizon(), set, &losses.bounds);
    if !variant.needs_model() {
        return Ok(alg);
    }
    let model = model.ok_or_else(|| CliError::Usage(format!("{variant} needs a dynamical model")))?;
    Ok(alg.with_model(model.clone()))
}

pub fn algorithm_config(
    variant: Variant,
    inst: &Instance,
    config: &ExperimentConfig,
) -> Result<AlgorithmConfig, CliError> {
    let mut alg = algorithm_config_for(variant, &inst.set, &inst.losses, inst.model.as_ref())?;
    if let Some(c) = config.loss_range {
        alg.loss_range = c;
    }
    if let (Some(eta), false) = (config.eta, variant.is_meta()) {
        alg = alg.with_eta(eta);
    }
    Ok(alg)
}

/// Runs one tuple, writes its trace under `trace_dir` if given, and returns its summary rows.
pub fn run_tuple(
    key: &TupleKey,
    config: &ExperimentConfig,
    trace_dir: Option<&Path>,
) -> Result<Vec<SummaryRow>, CliError> {
    let env = &config.environments[key.env_index];
    let context = key.file_stem();
    let inst = build_instance(env, key.horizon, config.dim, config.diameter, key.seed)
        .map_err(|e| e.context(&context))?;
    let alg = algorithm_config(key.variant, &inst, config).map_err(|e| e.context(&context))?;
    let mut trace = run(&inst.losses.rounds, &alg, &inst.set).map_err(|e| CliError::from(e).context(&context))?;

    let mut rows = Vec::with_capacity(config.comparators.len());
    for spec in &config.comparators {
        let u = build_comparator(spec, &inst).map_err(|e| e.context(&context))?;
        let report = trace
            .register_comparator(&spec.name(), &u, &inst.losses.rounds)
            .map_err(|e| CliError::from(e).context(&context))?
            .clone();
        let dynamic = match (report.dynamic_path_length, &inst.model) {
            (Some(p), _) => Some(p),
            (None, Some(m)) => Some(dynamic_path_length(&u, m)?),
            (None, None) => None,
        };
        rows.push(SummaryRow {
            algorithm: key.algorithm.clone(),
            environment: key.environment.clone(),
            horizon: key.horizon,
            seed: key.seed,
            comparator: report.name.clone(),
            regret: report.regret,
            path_length: report.path_length,
            dynamic_path_length: dynamic,
            theorem: report.theorem.id(),
            bound: report.bound,
            slack: report.slack,
            ratio: scaling_ratio(report.regret, key.horizon, report.path_length),
            cumulative_loss: trace.cumulative_loss,
            grad_queries: trace.grad_queries,
            value_queries: trace.value_queries,
        });
    }
    if let Some(dir) = trace_dir {
        let path = dir.join(format!("{}.csv", key.file_stem()));
        write_atomic(&path, trace_table(&trace).render().as_bytes())?;
    }
    Ok(rows)
}

/// Per-round trace: one cumulative-regret and one path-length column per comparator.
pub fn trace_table(trace: &RegretTrace) -> CsvTable {
    let mut header = vec!["round".to_string(), "loss".into(), "cum_loss".into()];
    header.extend(trace.comparators.iter().map(|c| format!("cum_regret_{}", c.name)));
    header.extend(trace.comparators.iter().map(|c| format!("path_length_so_far_{}", c.name)));
    header.push("grad_queries".into());
    let mut table = CsvTable::new(header);
    let mut cum = 0.0;
    for (t, rec) in trace.rounds.iter().enumerate() {
        cum += rec.loss;
        let mut row = vec![(t + 1).to_string(), fmt_float(rec.loss), fmt_float(cum)];
        row.extend(trace.comparators.iter().map(|c| fmt_float(c.cumulative_regret[t])));
        row.extend(trace.comparators.iter().map(|c| fmt_float(c.path_length_so_far[t])));
        row.push(rec.grad_queries.to_string());
        table.push(row);
    }
    table
}
