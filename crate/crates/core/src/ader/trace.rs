use serde::{Deserialize, Serialize};

use super::bounds::{bound_value, BoundParams, Theorem};
use super::{AlgorithmConfig, SurrogateLoss, Variant};
use crate::environments::{
    dynamic_path_length, path_length, ComparatorSequence, DynamicalModel, LossFunction,
};
use crate::error::{Error, Result};
use crate::geometry::{distance, FeasibleSet, Vector};
use crate::meta::{MetaState, StepSizeGrid};

/// What happened in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub play: Vector,
    /// `f_t(x_t)`
    pub loss: f64,
    /// Gradient queries made by the algorithm this round.
    pub grad_queries: u64,
    /// Value queries made by the algorithm this round.
    pub value_queries: u64,
    /// Expert plays, kept only when `record_experts` is set.
    pub expert_plays: Option<Vec<Vector>>,
    /// `∇f_t(x_t)` for the surrogate-loss variant.
    pub anchor_gradient: Option<Vector>,
}

/// Regret of a trace against one registered comparator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorReport {
    pub name: String,
    pub regret: f64,
    pub path_length: f64,
    pub dynamic_path_length: Option<f64>,
    pub theorem: Theorem,
    pub bound: f64,
    /// `bound − regret`
    pub slack: f64,
    /// Regret over rounds `1..=t`.
    pub cumulative_regret: Vec<f64>,
    /// Path length of `u_1..u_t`.
    pub path_length_so_far: Vec<f64>,
}

impl ComparatorReport {
    /// `regret ≤ bound` with relative slack `rel`.
    pub fn within_bound(&self, rel: f64) -> bool {
        self.regret <= self.bound + rel * self.bound.abs().max(1.0)
    }
}

/// Outcome of the meta-regret runtime check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaRegretCheck {
    /// Cumulative meta-level loss of the combined play (true or surrogate).
    pub meta_loss: f64,
    /// `min_i [L_i + ln(1/w_1^i)/α] + αT·range²/8`
    pub bound: f64,
    /// Zero-based grid index achieving the minimum.
    pub best_expert: usize,
}

impl MetaRegretCheck {
    pub fn holds(&self, rel: f64) -> bool {
        self.meta_loss <= self.bound + rel * self.bound.abs().max(1.0)
    }
}

/// Complete record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub config: AlgorithmConfig,
    pub rounds: Vec<RoundRecord>,
    pub cumulative_loss: f64,
    pub grad_queries: u64,
    pub value_queries: u64,
    pub grid: Option<StepSizeGrid>,
    /// Final meta state (weights after the last update).
    pub meta: Option<MetaState>,
    /// Cumulative meta-level loss of the combined play.
    pub meta_loss: Option<f64>,
    pub comparators: Vec<ComparatorReport>,
}

impl RegretTrace {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    pub fn plays(&self) -> Vec<Vector> {
        self.rounds.iter().map(|r| r.play.clone()).collect()
    }

    /// The guarantee that applies to this run.
    pub fn theorem(&self) -> Theorem {
        self.config.theorem()
    }

    /// Path-length measure the bound is stated in: `P` or `P'` under the run's model.
    fn bound_model(&self) -> Option<&DynamicalModel> {
        if self.theorem().uses_dynamics() {
            self.config.model.as_ref()
        } else {
            None
        }
    }

    /// Evaluates `u` against this trace and stores the report.
    pub fn register_comparator<L: LossFunction>(
        &mut self,
        name: &str,
        u: &ComparatorSequence,
        losses: &[L],
    ) -> Result<&ComparatorReport> {
        if u.len() != self.horizon() {
            return Err(Error::LengthMismatch {
                expected: self.horizon(),
                found: u.len(),
            });
        }
        if losses.len() != self.horizon() {
            return Err(Error::LengthMismatch {
                expected: self.horizon(),
                found: losses.len(),
            });
        }
        let mut cumulative_regret = Vec::with_capacity(u.len());
        let mut path_so_far = Vec::with_capacity(u.len());
        let mut regret = 0.0;
        let mut path = 0.0;
        for (t, ((rec, f), ut)) in self.rounds.iter().zip(losses).zip(u.points()).enumerate() {
            regret += rec.loss - f.value(ut);
            if t > 0 {
                path += distance(ut, &u.points()[t - 1])?;
            }
            cumulative_regret.push(regret);
            path_so_far.push(path);
        }
        let total_path = path_length(u)?;
        let dynamic = match &self.config.model {
            Some(m) => Some(dynamic_path_length(u, m)?),
            None => None,
        };
        let theorem = self.theorem();
        let measured = match self.bound_model() {
            Some(_) => dynamic.expect("dynamical theorems carry a model"),
            None => total_path,
        };
        let bound = bound_value(
            theorem,
            &BoundParams {
                diameter: self.config.diameter,
                grad_bound: self.config.grad_bound,
                loss_range: self.config.loss_range,
                horizon: self.horizon(),
                eta: self.config.ogd_step(),
                path: measured,
            },
        )?;
        self.comparators.push(ComparatorReport {
            name: name.to_string(),
            regret,
            path_length: total_path,
            dynamic_path_length: dynamic,
            theorem,
            bound,
            slack: bound - regret,
            cumulative_regret,
            path_length_so_far: path_so_far,
        });
        Ok(self.comparators.last().unwrap())
    }

    pub fn comparator(&self, name: &str) -> Option<&ComparatorReport> {
        self.comparators.iter().find(|c| c.name == name)
    }

    /// Meta-regret runtime check; `None` for the single-expert baselines.
    pub fn meta_regret_check(&self) -> Option<MetaRegretCheck> {
        let meta = self.meta.as_ref()?;
        let (best_expert, bound) = meta.regret_bound(self.config.alpha_tuning().loss_range());
        Some(MetaRegretCheck {
            meta_loss: self.meta_loss?,
            bound,
            best_expert,
        })
    }

    /// Largest violation of `f_t(x_t) − f_t(u) ≤ ℓ_t(x_t) − ℓ_t(u)` over the given points,
    /// for every round of a surrogate-loss run. Negative means the inequality holds.
    pub fn surrogate_gap<L: LossFunction>(&self, losses: &[L], points: &[Vector]) -> Result<f64> {
        if self.config.variant != Variant::AderImproved {
            return Err(Error::invalid("surrogate check needs an ader-improved trace"));
        }
        if losses.len() != self.horizon() {
            return Err(Error::LengthMismatch {
                expected: self.horizon(),
                found: losses.len(),
            });
        }
        let mut worst = f64::NEG_INFINITY;
        for (rec, f) in self.rounds.iter().zip(losses) {
            let g = rec.anchor_gradient.clone().expect("surrogate runs record the anchor gradient");
            let ell = SurrogateLoss::new(rec.play.clone(), g)?;
            for u in points {
                let lhs = rec.loss - f.value(u);
                let rhs = ell.eval(&rec.play)? - ell.eval(u)?;
                worst = worst.max(lhs - rhs);
            }
        }
        Ok(worst)
    }

    /// Largest play norm over the run.
    pub fn max_play_norm(&self) -> f64 {
        self.rounds.iter().map(|r| r.play.norm()).fold(0.0, f64::max)
    }

    /// Every play lies in `set` up to `slack` on the radius.
    pub fn plays_feasible(&self, set: &FeasibleSet, slack: f64) -> bool {
        self.rounds.iter().all(|r| set.contains(&r.play, slack))
    }
}

/// `Σ f_t(x_t) − Σ f_t(u_t)`
pub fn dynamic_regret<L: LossFunction>(
    plays: &[Vector],
    losses: &[L],
    u: &ComparatorSequence,
) -> Result<f64> {
    if plays.len() != losses.len() {
        return Err(Error::LengthMismatch {
            expected: losses.len(),
            found: plays.len(),
        });
    }
    if u.len() != losses.len() {
        return Err(Error::LengthMismatch {
            expected: losses.len(),
            found: u.len(),
        });
    }
    let learner: f64 = losses.iter().zip(plays).map(|(f, x)| f.value(x)).sum();
    let comparator: f64 = losses.iter().zip(u.points()).map(|(f, x)| f.value(x)).sum();
    Ok(learner - comparator)
}
