//! Round orchestration for the baselines and the three Ader variants.
//!
//! Each runner sees the losses only through a [`CountingOracle`], so the
//! gradient and value queries it reports are exactly what the algorithm asked
//! for. The loss of the combined play is evaluated outside that wrapper for
//! bookkeeping and is not counted.

mod bounds;
mod trace;

pub use bounds::{bound_value, BoundParams, Theorem};
pub use trace::{dynamic_regret, ComparatorReport, MetaRegretCheck, RegretTrace, RoundRecord};

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::environments::{audit_contraction, DynamicalModel, LossBounds, LossFunction};
use crate::error::{Error, Result};
use crate::experts::{ExpertState, ExpertVariant};
use crate::geometry::{FeasibleSet, Vector};
use crate::meta::{build_grid, tune_alpha, AlphaTuning, GridFlavor, MetaState, StepSizeGrid};

/// Sampled pairs per map in the pre-run contraction audit.
const CONTRACTION_AUDIT_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Single constant-step OGD.
    OgdBaseline,
    /// Single constant-step OGD composed with the dynamical model.
    OgdDynamical,
    /// True-loss meta-learner over plain OGD experts.
    AderBasic,
    /// Surrogate-loss meta-learner, one gradient query per round.
    AderImproved,
    /// True-loss meta-learner over dynamical OGD experts.
    AderDynamical,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::OgdBaseline,
        Variant::OgdDynamical,
        Variant::AderBasic,
        Variant::AderImproved,
        Variant::AderDynamical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::OgdBaseline => "ogd-baseline",
            Variant::OgdDynamical => "ogd-dynamical",
            Variant::AderBasic => "ader-basic",
            Variant::AderImproved => "ader-improved",
            Variant::AderDynamical => "ader-dynamical",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Variant::OgdDynamical | Variant::AderDynamical)
    }

    pub fn is_meta(self) -> bool {
        matches!(self, Variant::AderBasic | Variant::AderImproved | Variant::AderDynamical)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
            Error::invalid(format!(
                "unknown algorithm `{s}`; valid names: {}",
                names.join(", ")
            ))
        })
    }
}

/// Everything a runner needs besides the losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub variant: Variant,
    pub horizon: usize,
    pub diameter: f64,
    pub grad_bound: f64,
    /// Range `c` of the loss values.
    pub loss_range: f64,
    /// Step size of the OGD baselines; defaults to `D/(G√T)`.
    pub eta: Option<f64>,
    /// Grid override, accepted for `ader-basic` only.
    pub grid: Option<GridFlavor>,
    pub model: Option<DynamicalModel>,
    /// Keep every expert's play in the trace.
    pub record_experts: bool,
}

impl AlgorithmConfig {
    /// Config with constants taken from the feasible set and the loss family.
    pub fn new(variant: Variant, horizon: usize, set: &FeasibleSet, bounds: &LossBounds) -> Self {
        AlgorithmConfig {
            variant,
            horizon,
            diameter: set.diameter(),
            grad_bound: bounds.g,
            loss_range: bounds.c,
            eta: None,
            grid: None,
            model: None,
            record_experts: false,
        }
    }

    pub fn with_model(mut self, model: DynamicalModel) -> Self {
        self.model = Some(model);
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn with_grid(mut self, grid: GridFlavor) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn recording_experts(mut self) -> Self {
        self.record_experts = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon T must be at least 1"));
        }
        for (name, x) in [
            ("diameter D", self.diameter),
            ("gradient bound G", self.grad_bound),
            ("loss range c", self.loss_range),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {x}")));
            }
        }
        if let Some(eta) = self.eta {
            if self.variant.is_meta() {
                return Err(Error::invalid("a fixed step size applies to the OGD baselines only"));
            }
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::invalid(format!("step size must be positive, got {eta}")));
            }
        }
        if self.grid.is_some() && self.variant != Variant::AderBasic {
            return Err(Error::invalid("grid override is accepted for ader-basic only"));
        }
        if self.variant.needs_model() && self.model.is_none() {
            return Err(Error::invalid(format!("{} requires a dynamical model", self.variant)));
        }
        Ok(())
    }

    /// Step size of the single-expert baselines.
    pub fn ogd_step(&self) -> Option<f64> {
        match self.variant {
            Variant::OgdBaseline | Variant::OgdDynamical => Some(
                self.eta
                    .unwrap_or_else(|| self.diameter / (self.grad_bound * (self.horizon as f64).sqrt())),
            ),
            _ => None,
        }
    }

    pub fn grid_flavor(&self) -> GridFlavor {
        match (self.variant, self.grid) {
            (_, Some(g)) => g,
            (Variant::AderDynamical, None) => GridFlavor::Dynamical,
            _ => GridFlavor::Basic,
        }
    }

    pub fn alpha_tuning(&self) -> AlphaTuning {
        match self.variant {
            Variant::AderImproved => AlphaTuning::Surrogate {
                g: self.grad_bound,
                d: self.diameter,
            },
            _ => AlphaTuning::Basic { c: self.loss_range },
        }
    }

    /// The regret guarantee matching this configuration.
    ///
    /// `ader-basic` on the dynamical grid is the identity-model case of the
    /// dynamical guarantee.
    pub fn theorem(&self) -> Theorem {
        match self.variant {
            Variant::OgdBaseline => Theorem::Ogd,
            Variant::OgdDynamical => Theorem::OgdDynamical,
            Variant::AderBasic if self.grid_flavor() == GridFlavor::Dynamical => Theorem::AderDynamical,
            Variant::AderBasic => Theorem::AderBasic,
            Variant::AderImproved => Theorem::AderImproved,
            Variant::AderDynamical => Theorem::AderDynamical,
        }
    }
}

/// Loss oracle wrapper that counts value and gradient queries.
pub struct CountingOracle<'a, L> {
    inner: &'a L,
    values: Cell<u64>,
    grads: Cell<u64>,
}

impl<'a, L: LossFunction> CountingOracle<'a, L> {
    pub fn new(inner: &'a L) -> Self {
        CountingOracle {
            inner,
            values: Cell::new(0),
            grads: Cell::new(0),
        }
    }

    pub fn value_queries(&self) -> u64 {
        self.values.get()
    }

    pub fn grad_queries(&self) -> u64 {
        self.grads.get()
    }
}

impl<L: LossFunction> LossFunction for CountingOracle<'_, L> {
    fn value(&self, x: &Vector) -> f64 {
        self.values.set(self.values.get() + 1);
        self.inner.value(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.grads.set(self.grads.get() + 1);
        self.inner.gradient(x)
    }
}

/// Linearization `ℓ(x) = ⟨g, x − anchor⟩` of a convex loss at `anchor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateLoss {
    anchor: Vector,
    gradient: Vector,
}

impl SurrogateLoss {
    pub fn new(anchor: Vector, gradient: Vector) -> Result<Self> {
        anchor.check_dim(&gradient)?;
        Ok(SurrogateLoss { anchor, gradient })
    }

    pub fn anchor(&self) -> &Vector {
        &self.anchor
    }

    pub fn gradient(&self) -> &Vector {
        &self.gradient
    }

    pub fn eval(&self, x: &Vector) -> Result<f64> {
        self.anchor.check_dim(x)?;
        Ok(surrogate_value(&self.gradient, &self.anchor, x))
    }
}

/// `⟨g, x − anchor⟩` without allocating.
fn surrogate_value(g: &Vector, anchor: &Vector, x: &Vector) -> f64 {
    g.as_slice()
        .iter()
        .zip(x.as_slice().iter().zip(anchor.as_slice()))
        .map(|(g, (a, b))| g * (a - b))
        .sum()
}

pub fn surrogate_eval(loss: &SurrogateLoss, x: &Vector) -> Result<f64> {
    loss.eval(x)
}

fn check_inputs<L: LossFunction>(losses: &[L], config: &AlgorithmConfig, set: &FeasibleSet) -> Result<()> {
    config.validate()?;
    if losses.len() != config.horizon {
        return Err(Error::LengthMismatch {
            expected: config.horizon,
            found: losses.len(),
        });
    }
    if (config.diameter - set.diameter()).abs() > 0.0 {
        return Err(Error::invalid(format!(
            "config diameter {} differs from the domain diameter {}",
            config.diameter,
            set.diameter()
        )));
    }
    if let Some(m) = &config.model {
        audit_contraction(m, set, CONTRACTION_AUDIT_SAMPLES, 0)?;
    }
    Ok(())
}

fn finite(x: f64, round: usize, what: &'static str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite { round, what })
    }
}

fn finite_vec(v: Vector, round: usize, what: &'static str) -> Result<Vector> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { round, what })
    }
}

struct TraceBuilder {
    rounds: Vec<RoundRecord>,
    cumulative_loss: f64,
    grad_queries: u64,
    value_queries: u64,
}

impl TraceBuilder {
    fn new(horizon: usize) -> Self {
        TraceBuilder {
            rounds: Vec::with_capacity(horizon),
            cumulative_loss: 0.0,
            grad_queries: 0,
            value_queries: 0,
        }
    }

    fn push(&mut self, rec: RoundRecord) {
        self.cumulative_loss += rec.loss;
        self.grad_queries += rec.grad_queries;
        self.value_queries += rec.value_queries;
        self.rounds.push(rec);
    }

    fn finish(
        self,
        config: &AlgorithmConfig,
        grid: Option<StepSizeGrid>,
        meta: Option<MetaState>,
        meta_loss: Option<f64>,
    ) -> RegretTrace {
        RegretTrace {
            config: config.clone(),
            rounds: self.rounds,
            cumulative_loss: self.cumulative_loss,
            grad_queries: self.grad_queries,
            value_queries: self.value_queries,
            grid,
            meta,
            meta_loss,
            comparators: Vec::new(),
        }
    }
}

/// Runs whichever algorithm `config.variant` names.
pub fn run<L: LossFunction>(losses: &[L], config: &AlgorithmConfig, set: &FeasibleSet) -> Result<RegretTrace> {
    match config.variant {
        Variant::OgdBaseline | Variant::OgdDynamical => run_single_ogd(losses, config, set),
        Variant::AderBasic => run_ader_basic(losses, config, set),
        Variant::AderImproved => run_ader_improved(losses, config, set),
        Variant::AderDynamical => run_ader_dynamical(losses, config, set),
    }
}

/// Constant-step OGD as a traced run; the dynamical baseline applies `Φ_t` after each step.
pub fn run_single_ogd<L: LossFunction>(
    losses: &[L],
    config: &AlgorithmConfig,
    set: &FeasibleSet,
) -> Result<RegretTrace> {
    if config.variant.is_meta() {
        return Err(Error::invalid(format!("{} is not a single-expert baseline", config.variant)));
    }
    check_inputs(losses, config, set)?;
    let eta = config.ogd_step().expect("baselines have a step size");
    let variant = if config.variant == Variant::OgdDynamical {
        ExpertVariant::Dynamical
    } else {
        ExpertVariant::Plain
    };
    let mut expert = ExpertState::new(eta, set, variant)?;
    let mut trace = TraceBuilder::new(losses.len());
    for (t, f) in losses.iter().enumerate() {
        let oracle = CountingOracle::new(f);
        let play = expert.iterate().clone();
        let loss = finite(f.value(&play), t, "loss")?;
        let g = finite_vec(oracle.gradient(&play), t, "gradient")?;
        expert = match &config.model {
            Some(m) if variant == ExpertVariant::Dynamical => expert.dynamical_step(&g, m, t, set)?,
            _ => expert.ogd_step(&g, set)?,
        };
        trace.push(RoundRecord {
            play,
            loss,
            grad_queries: oracle.grad_queries(),
            value_queries: oracle.value_queries(),
            expert_plays: None,
            anchor_gradient: None,
        });
    }
    Ok(trace.finish(config, None, None, None))
}

fn init_experts(grid: &StepSizeGrid, set: &FeasibleSet, variant: ExpertVariant) -> Result<Vec<ExpertState>> {
    grid.etas()
        .iter()
        .map(|&eta| ExpertState::new(eta, set, variant))
        .collect()
}

/// Meta-learner fed true losses; every expert gets its own value and gradient each round.
fn run_true_loss_meta<L: LossFunction>(
    losses: &[L],
    config: &AlgorithmConfig,
    set: &FeasibleSet,
    expert_variant: ExpertVariant,
) -> Result<RegretTrace> {
    check_inputs(losses, config, set)?;
    let grid = build_grid(config.horizon, config.diameter, config.grad_bound, config.grid_flavor())?;
    let alpha = tune_alpha(config.horizon, config.alpha_tuning())?;
    let mut meta = MetaState::for_grid(&grid, alpha)?;
    let mut experts = init_experts(&grid, set, expert_variant)?;
    let model = match expert_variant {
        ExpertVariant::Dynamical => Some(config.model.as_ref().expect("validated")),
        _ => None,
    };
    let mut trace = TraceBuilder::new(losses.len());
    let mut meta_loss = 0.0;

    for (t, f) in losses.iter().enumerate() {
        let plays: Vec<Vector> = experts.iter().map(|e| e.iterate().clone()).collect();
        let play = meta.combine(&plays)?;
        let loss = finite(f.value(&play), t, "loss")?;
        meta_loss += loss;

        let oracle = CountingOracle::new(f);
        let mut expert_losses = Vec::with_capacity(plays.len());
        for x in &plays {
            expert_losses.push(finite(oracle.value(x), t, "expert loss")?);
        }
        meta = meta.update(&expert_losses)?;
        experts = experts
            .iter()
            .zip(&plays)
            .map(|(e, x)| {
                let g = finite_vec(oracle.gradient(x), t, "gradient")?;
                match model {
                    Some(m) => e.dynamical_step(&g, m, t, set),
                    None => e.ogd_step(&g, set),
                }
            })
            .collect::<Result<_>>()?;

        trace.push(RoundRecord {
            play,
            loss,
            grad_queries: oracle.grad_queries(),
            value_queries: oracle.value_queries(),
            expert_plays: config.record_experts.then_some(plays),
            anchor_gradient: None,
        });
    }
    Ok(trace.finish(config, Some(grid), Some(meta), Some(meta_loss)))
}

/// Exponentially weighted combination of plain OGD experts, updated with true losses.
/// Makes `N` value and `N` gradient queries per round.
pub fn run_ader_basic<L: LossFunction>(
    losses: &[L],
    config: &AlgorithmConfig,
    set: &FeasibleSet,
) -> Result<RegretTrace> {
    if config.variant != Variant::AderBasic {
        return Err(Error::invalid(format!("expected ader-basic, got {}", config.variant)));
    }
    run_true_loss_meta(losses, config, set, ExpertVariant::Plain)
}

/// Like [`run_ader_basic`] but each expert applies the dynamical model after its step.
pub fn run_ader_dynamical<L: LossFunction>(
    losses: &[L],
    config: &AlgorithmConfig,
    set: &FeasibleSet,
) -> Result<RegretTrace> {
    if config.variant != Variant::AderDynamical {
        return Err(Error::invalid(format!("expected ader-dynamical, got {}", config.variant)));
    }
    run_true_loss_meta(losses, config, set, ExpertVariant::Dynamical)
}

/// Surrogate-loss variant: one gradient query at the combined play per round, shared by
/// every expert; weights are updated with `ℓ_t(x_t^η) = ⟨∇f_t(x_t), x_t^η − x_t⟩`.
pub fn run_ader_improved<L: LossFunction>(
    losses: &[L],
    config: &AlgorithmConfig,
    set: &FeasibleSet,
) -> Result<RegretTrace> {
    if config.variant != Variant::AderImproved {
        return Err(Error::invalid(format!("expected ader-improved, got {}", config.variant)));
    }
    check_inputs(losses, config, set)?;
    let grid = build_grid(config.horizon, config.diameter, config.grad_bound, GridFlavor::Basic)?;
    let alpha = tune_alpha(config.horizon, config.alpha_tuning())?;
    let mut meta = MetaState::for_grid(&grid, alpha)?;
    let mut experts = init_experts(&grid, set, ExpertVariant::Surrogate)?;
    let mut trace = TraceBuilder::new(losses.len());
    let mut meta_loss = 0.0;

    for (t, f) in losses.iter().enumerate() {
        let plays: Vec<Vector> = experts.iter().map(|e| e.iterate().clone()).collect();
        let play = meta.combine(&plays)?;
        let loss = finite(f.value(&play), t, "loss")?;

        let oracle = CountingOracle::new(f);
        let g = finite_vec(oracle.gradient(&play), t, "gradient")?;
        let surrogate = SurrogateLoss::new(play.clone(), g)?;
        meta_loss += surrogate.eval(&play)?;
        let expert_losses = plays
            .iter()
            .map(|x| surrogate.eval(x))
            .collect::<Result<Vec<_>>>()?;
        meta = meta.update(&expert_losses)?;
        experts = experts
            .iter()
            .map(|e| e.ogd_step(surrogate.gradient(), set))
            .collect::<Result<_>>()?;

        trace.push(RoundRecord {
            play,
            loss,
            grad_queries: oracle.grad_queries(),
            value_queries: oracle.value_queries(),
            expert_plays: config.record_experts.then_some(plays),
            anchor_gradient: Some(surrogate.gradient().clone()),
        });
    }
    Ok(trace.finish(config, Some(grid), Some(meta), Some(meta_loss)))
}
