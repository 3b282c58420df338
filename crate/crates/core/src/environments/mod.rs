//! Synthetic loss sequences and the adversarial lower-bound construction.
//!
//! Every generator is a pure function of its [`EnvironmentSpec`] (seed included)
//! and records honest `(a, c, G)` constants in [`LossBounds`] so the learners
//! can tune themselves from them.

mod comparators;
mod dynamics;

pub use comparators::{
    best_block_comparators, dynamic_path_length, grid_search_block, path_length, BlockPartition,
    ComparatorSequence, GRID_RESOLUTION,
};
pub use dynamics::{audit_contraction, make_contraction, Contraction, DynamicalModel};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{random_unit, FeasibleSet, Vector};

/// Value and gradient oracle for one round's convex loss.
pub trait LossFunction {
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;

    /// Structural hint used by the block comparator solver.
    fn shape(&self) -> LossShape<'_> {
        LossShape::General
    }
}

#[derive(Debug, Clone, Copy)]
pub enum LossShape<'a> {
    /// `⟨g, x⟩`
    Linear(&'a Vector),
    /// `½‖x − θ‖²`
    Quadratic(&'a Vector),
    General,
}

/// Loss functions produced by the built-in generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RoundLoss {
    /// `f(x) = ½‖x − target‖²`
    Quadratic { target: Vector },
    /// `f(x) = ⟨gradient, x⟩`
    Linear { gradient: Vector },
}

impl LossFunction for RoundLoss {
    fn value(&self, x: &Vector) -> f64 {
        match self {
            RoundLoss::Quadratic { target } => 0.5 * x.sub(target).norm_sq(),
            RoundLoss::Linear { gradient } => gradient.dot(x),
        }
    }

    fn gradient(&self, x: &Vector) -> Vector {
        match self {
            RoundLoss::Quadratic { target } => x.sub(target),
            RoundLoss::Linear { gradient } => gradient.clone(),
        }
    }

    fn shape(&self) -> LossShape<'_> {
        match self {
            RoundLoss::Quadratic { target } => LossShape::Quadratic(target),
            RoundLoss::Linear { gradient } => LossShape::Linear(gradient),
        }
    }
}

/// Constants of the loss family on the domain: values in `[a, a + c]`, gradient norms `≤ g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBounds {
    pub a: f64,
    pub c: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSequence {
    pub rounds: Vec<RoundLoss>,
    pub bounds: LossBounds,
}

impl LossSequence {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    QuadraticTracking,
    LinearAdversary,
    LowerBound,
}

impl Family {
    pub const ALL: [Family; 3] = [
        Family::QuadraticTracking,
        Family::LinearAdversary,
        Family::LowerBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::QuadraticTracking => "quadratic-tracking",
            Family::LinearAdversary => "linear-adversary",
            Family::LowerBound => "lower-bound",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown environment family `{s}`")))
    }
}

/// Parameters of one synthetic environment.
///
/// * `drift`: random-walk step length of the quadratic target (used when `switches == 0`).
/// * `switches`: number of target changes of a piecewise-constant quadratic target.
/// * `tau`: path-length budget of the lower-bound construction.
/// * `gradient_bound`: `G` for the linear families (quadratic tracking always uses `G = D`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub family: Family,
    pub horizon: usize,
    pub dim: usize,
    pub seed: u64,
    pub drift: f64,
    pub switches: usize,
    pub tau: f64,
    pub gradient_bound: f64,
}

impl EnvironmentSpec {
    pub fn new(family: Family, horizon: usize, dim: usize, seed: u64) -> Self {
        EnvironmentSpec {
            family,
            horizon,
            dim,
            seed,
            drift: 0.0,
            switches: 0,
            tau: 0.0,
            gradient_bound: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon T must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(self.drift.is_finite() && self.drift >= 0.0) {
            return Err(Error::invalid(format!("drift must be >= 0, got {}", self.drift)));
        }
        if self.switches >= self.horizon {
            return Err(Error::invalid(format!(
                "switch count {} must be below the horizon {}",
                self.switches, self.horizon
            )));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::invalid(format!("tau must be >= 0, got {}", self.tau)));
        }
        if !(self.gradient_bound.is_finite() && self.gradient_bound > 0.0) {
            return Err(Error::invalid(format!(
                "gradient bound must be positive, got {}",
                self.gradient_bound
            )));
        }
        Ok(())
    }
}

fn check_family(spec: &EnvironmentSpec, set: &FeasibleSet, want: Family) -> Result<()> {
    if spec.family != want {
        return Err(Error::invalid(format!(
            "expected a {want} spec, got {}",
            spec.family
        )));
    }
    spec.validate()?;
    if spec.dim != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            found: spec.dim,
        });
    }
    Ok(())
}

/// Quadratic losses `½‖x − θ_t‖²` around a target drifting inside the ball.
///
/// With `switches > 0` the target is piecewise constant over `switches + 1`
/// near-equal segments, each drawn uniformly from the ball. Otherwise it is a
/// projected random walk with step length `drift`.
pub fn make_quadratic_tracking(spec: &EnvironmentSpec, set: &FeasibleSet) -> Result<LossSequence> {
    check_family(spec, set, Family::QuadraticTracking)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let targets = if spec.switches > 0 {
        let segments = BlockPartition::even(spec.horizon, spec.switches + 1)?;
        let mut out = Vec::with_capacity(spec.horizon);
        for block in segments.blocks() {
            let target = set.sample(&mut rng);
            out.extend(std::iter::repeat_n(target, block.len()));
        }
        out
    } else {
        let mut theta = set.sample(&mut rng);
        let mut out = Vec::with_capacity(spec.horizon);
        for _ in 0..spec.horizon {
            out.push(theta.clone());
            let step = random_unit(set.dim(), &mut rng);
            theta = set.project_unchecked(&theta.add_scaled(spec.drift, &step));
        }
        out
    };
    let d = set.diameter();
    Ok(LossSequence {
        rounds: targets
            .into_iter()
            .map(|target| RoundLoss::Quadratic { target })
            .collect(),
        bounds: LossBounds {
            a: 0.0,
            c: d * d / 2.0,
            g: d,
        },
    })
}

/// Linear losses `⟨g_t, x⟩` with `g_t` a fresh random direction scaled to `G`.
pub fn make_linear_adversary(spec: &EnvironmentSpec, set: &FeasibleSet) -> Result<LossSequence> {
    check_family(spec, set, Family::LinearAdversary)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let g = spec.gradient_bound;
    let rounds = (0..spec.horizon)
        .map(|_| RoundLoss::Linear {
            gradient: random_unit(set.dim(), &mut rng).scale(g),
        })
        .collect();
    Ok(LossSequence {
        rounds,
        bounds: linear_bounds(g, set.diameter()),
    })
}

fn linear_bounds(g: f64, d: f64) -> LossBounds {
    LossBounds {
        a: -g * d / 2.0,
        c: g * d,
        g,
    }
}

/// Quadratic losses whose minimizers follow `model` exactly from `start`:
/// `θ_1 = start`, `θ_{t+1} = Φ_t(θ_t)`. Returns the losses and the minimizer sequence.
pub fn make_model_tracking(
    horizon: usize,
    set: &FeasibleSet,
    model: &DynamicalModel,
    start: &Vector,
) -> Result<(LossSequence, ComparatorSequence)> {
    if horizon == 0 {
        return Err(Error::invalid("horizon T must be at least 1"));
    }
    set.check_dim(start)?;
    if model.dim() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            found: model.dim(),
        });
    }
    let mut targets = Vec::with_capacity(horizon);
    let mut theta = set.project(start)?;
    for t in 0..horizon {
        targets.push(theta.clone());
        theta = model.apply(t, &theta);
    }
    let comparator = ComparatorSequence::new(targets.clone(), set)?;
    let d = set.diameter();
    let losses = LossSequence {
        rounds: targets
            .into_iter()
            .map(|target| RoundLoss::Quadratic { target })
            .collect(),
        bounds: LossBounds {
            a: 0.0,
            c: d * d / 2.0,
            g: d,
        },
    };
    Ok((losses, comparator))
}

/// Output of [`make_lowerbound_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundInstance {
    pub losses: LossSequence,
    /// Best fixed point of each block, repeated over the block.
    pub comparator: ComparatorSequence,
    pub blocks: BlockPartition,
    pub requested_tau: f64,
    /// Path-length actually realized by `comparator`.
    pub realized_tau: f64,
}

/// Random-sign linear losses split into `⌈τ/D⌉` blocks with a per-block best comparator.
///
/// Gradients are `ε_t·G·v` for a fixed random unit `v` and i.i.d. signs `ε_t`.
/// When the block count does not divide `T` the final block absorbs the remainder.
pub fn make_lowerbound_instance(
    horizon: usize,
    tau: f64,
    set: &FeasibleSet,
    gradient_bound: f64,
    seed: u64,
) -> Result<LowerBoundInstance> {
    if horizon == 0 {
        return Err(Error::invalid("horizon T must be at least 1"));
    }
    let d = set.diameter();
    let max_tau = horizon as f64 * d;
    if !(tau.is_finite() && (0.0..=max_tau).contains(&tau)) {
        return Err(Error::invalid(format!(
            "tau must lie in [0, T*D] = [0, {max_tau}], got {tau}"
        )));
    }
    if !(gradient_bound.is_finite() && gradient_bound > 0.0) {
        return Err(Error::invalid("gradient bound must be positive"));
    }
    let block_count = ((tau / d).ceil() as usize).clamp(1, horizon);
    let blocks = BlockPartition::even(horizon, block_count)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = random_unit(set.dim(), &mut rng).scale(gradient_bound);
    let rounds: Vec<RoundLoss> = (0..horizon)
        .map(|_| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            RoundLoss::Linear {
                gradient: v.scale(sign),
            }
        })
        .collect();
    let comparator = best_block_comparators(&rounds, &blocks, set)?;
    let realized_tau = path_length(&comparator)?;
    Ok(LowerBoundInstance {
        losses: LossSequence {
            rounds,
            bounds: linear_bounds(gradient_bound, d),
        },
        comparator,
        blocks,
        requested_tau: tau,
        realized_tau,
    })
}

/// Dispatches on `spec.family`. For the lower-bound family only the losses are returned.
pub fn generate(spec: &EnvironmentSpec, set: &FeasibleSet) -> Result<LossSequence> {
    match spec.family {
        Family::QuadraticTracking => make_quadratic_tracking(spec, set),
        Family::LinearAdversary => make_linear_adversary(spec, set),
        Family::LowerBound => {
            check_family(spec, set, Family::LowerBound)?;
            Ok(make_lowerbound_instance(spec.horizon, spec.tau, set, spec.gradient_bound, spec.seed)?.losses)
        }
    }
}

/// Sampled check of the loss assumptions: value range, gradient bound and
/// first-order convexity at `samples` random feasible points per round.
pub fn audit_losses<L: LossFunction>(
    rounds: &[L],
    bounds: &LossBounds,
    set: &FeasibleSet,
    samples: usize,
    seed: u64,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slack = 1e-9 * (1.0 + bounds.a.abs() + bounds.c.abs() + bounds.g);
    for (t, f) in rounds.iter().enumerate() {
        for _ in 0..samples {
            let x = set.sample(&mut rng);
            let y = set.sample(&mut rng);
            let fx = f.value(&x);
            let gx = f.gradient(&x);
            if fx < bounds.a - slack || fx > bounds.a + bounds.c + slack {
                return Err(Error::invalid(format!(
                    "round {t}: value {fx} outside [{}, {}]",
                    bounds.a,
                    bounds.a + bounds.c
                )));
            }
            if gx.norm() > bounds.g + slack {
                return Err(Error::invalid(format!(
                    "round {t}: gradient norm {} exceeds G = {}",
                    gx.norm(),
                    bounds.g
                )));
            }
            if f.value(&y) < fx + gx.dot(&y.sub(&x)) - slack {
                return Err(Error::invalid(format!(
                    "round {t}: first-order convexity violated"
                )));
            }
        }
    }
    Ok(())
}
