//! Constant-step online gradient descent experts.
//!
//! Updates are value-semantic: a step consumes a state by reference and returns
//! the next one, leaving sequencing to the caller.

use serde::{Deserialize, Serialize};

use crate::environments::{DynamicalModel, LossFunction};
use crate::error::{Error, Result};
use crate::geometry::{FeasibleSet, Vector};

/// Which gradient the expert consumes and whether a dynamical model follows the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpertVariant {
    /// Gradient at the expert's own iterate.
    Plain,
    /// Shared gradient at the meta play.
    Surrogate,
    /// Own gradient, followed by `Φ_t`.
    Dynamical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertState {
    eta: f64,
    iterate: Vector,
    variant: ExpertVariant,
}

impl ExpertState {
    /// Starts at the origin.
    pub fn new(eta: f64, set: &FeasibleSet, variant: ExpertVariant) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::invalid(format!("step size must be positive, got {eta}")));
        }
        Ok(ExpertState {
            eta,
            iterate: set.origin(),
            variant,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn iterate(&self) -> &Vector {
        &self.iterate
    }

    pub fn variant(&self) -> ExpertVariant {
        self.variant
    }

    /// `Π_X[x − η·g]`
    pub fn ogd_step(&self, gradient: &Vector, set: &FeasibleSet) -> Result<Self> {
        set.check_dim(gradient)?;
        Ok(self.with_iterate(set.project_unchecked(&self.iterate.add_scaled(-self.eta, gradient))))
    }

    /// `Φ_t(Π_X[x − η·g])`
    pub fn dynamical_step(
        &self,
        gradient: &Vector,
        model: &DynamicalModel,
        round: usize,
        set: &FeasibleSet,
    ) -> Result<Self> {
        set.check_dim(gradient)?;
        model.check_dim(gradient)?;
        let intermediate = set.project_unchecked(&self.iterate.add_scaled(-self.eta, gradient));
        Ok(self.with_iterate(model.apply(round, &intermediate)))
    }

    fn with_iterate(&self, iterate: Vector) -> Self {
        ExpertState {
            eta: self.eta,
            iterate,
            variant: self.variant,
        }
    }
}

/// Constant-step OGD from the origin; returns the `T` plays.
///
/// Play `t` is chosen before `f_t` is seen and the gradient is queried once per
/// round, at that play.
pub fn run_ogd_baseline<L: LossFunction>(
    losses: &[L],
    eta: f64,
    set: &FeasibleSet,
) -> Result<Vec<Vector>> {
    let mut state = ExpertState::new(eta, set, ExpertVariant::Plain)?;
    let mut plays = Vec::with_capacity(losses.len());
    for (t, f) in losses.iter().enumerate() {
        let g = f.gradient(state.iterate());
        if !g.is_finite() {
            return Err(Error::NonFinite { round: t, what: "gradient" });
        }
        let next = state.ogd_step(&g, set)?;
        plays.push(std::mem::replace(&mut state, next).iterate);
    }
    Ok(plays)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{make_contraction, Contraction, RoundLoss};

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn at(x: &[f64], eta: f64, variant: ExpertVariant) -> ExpertState {
        ExpertState {
            eta,
            iterate: v(x),
            variant,
        }
    }

    #[test]
    fn init_at_origin() {
        let set = FeasibleSet::ball(3, 2.0).unwrap();
        let e = ExpertState::new(0.5, &set, ExpertVariant::Plain).unwrap();
        assert_eq!(e.iterate(), &Vector::zeros(3));
        assert_eq!(e, ExpertState::new(0.5, &set, ExpertVariant::Plain).unwrap());
        assert!(ExpertState::new(0.0, &set, ExpertVariant::Plain).is_err());
        assert!(ExpertState::new(-1.0, &set, ExpertVariant::Plain).is_err());
    }

    #[test]
    fn ogd_step_examples() {
        let set = FeasibleSet::ball(2, 2.0).unwrap();
        let e = at(&[0.0, 0.0], 0.1, ExpertVariant::Plain);
        assert_eq!(e.ogd_step(&v(&[1.0, 0.0]), &set).unwrap().iterate(), &v(&[-0.1, 0.0]));

        let e = at(&[1.0, 0.0], 1.0, ExpertVariant::Plain);
        assert_eq!(e.ogd_step(&v(&[-10.0, 0.0]), &set).unwrap().iterate(), &v(&[1.0, 0.0]));

        let e = at(&[0.3, -0.2], 0.7, ExpertVariant::Plain);
        let next = e.ogd_step(&v(&[0.0, 0.0]), &set).unwrap();
        assert_eq!(next.iterate(), e.iterate());
        assert!(e.ogd_step(&v(&[1.0]), &set).is_err());
    }

    #[test]
    fn dynamical_step_examples() {
        let set = FeasibleSet::ball(2, 2.0).unwrap();
        let id = make_contraction(Contraction::Identity, &set).unwrap();
        let half = make_contraction(Contraction::Shrink { rho: 0.5 }, &set).unwrap();

        let e = at(&[0.4, -0.9], 0.3, ExpertVariant::Dynamical);
        let g = v(&[1.7, -2.0]);
        assert_eq!(
            e.dynamical_step(&g, &id, 0, &set).unwrap().iterate(),
            e.ogd_step(&g, &set).unwrap().iterate()
        );

        let e = at(&[0.0, 0.0], 0.2, ExpertVariant::Dynamical);
        let next = e.dynamical_step(&v(&[1.0, 0.0]), &half, 0, &set).unwrap();
        assert!((next.iterate()[0] + 0.1).abs() < 1e-16);

        let e = at(&[0.4, 0.0], 0.2, ExpertVariant::Dynamical);
        let next = e.dynamical_step(&v(&[0.0, 0.0]), &half, 0, &set).unwrap();
        assert_eq!(next.iterate(), &v(&[0.2, 0.0]));
    }

    #[test]
    fn baseline_examples() {
        let set = FeasibleSet::ball(1, 2.0).unwrap();
        let zero = vec![RoundLoss::Linear { gradient: v(&[0.0]) }; 4];
        let plays = run_ogd_baseline(&zero, 0.3, &set).unwrap();
        assert!(plays.iter().all(|p| *p == v(&[0.0])));

        let two = vec![
            RoundLoss::Linear { gradient: v(&[1.0]) },
            RoundLoss::Linear { gradient: v(&[1.0]) },
        ];
        let plays = run_ogd_baseline(&two, 0.5, &set).unwrap();
        assert_eq!(plays, vec![v(&[0.0]), v(&[-0.5])]);
    }

    #[test]
    fn baseline_regret_against_origin_is_sum_of_inner_products() {
        let set = FeasibleSet::ball(2, 2.0).unwrap();
        let losses: Vec<RoundLoss> = [[0.5, 0.1], [-0.3, 0.8], [0.2, -0.6], [0.9, 0.0]]
            .iter()
            .map(|g| RoundLoss::Linear { gradient: v(g) })
            .collect();
        let plays = run_ogd_baseline(&losses, 0.4, &set).unwrap();
        let regret: f64 = losses.iter().zip(&plays).map(|(f, x)| f.value(x)).sum::<f64>()
            - losses.iter().map(|f| f.value(&set.origin())).sum::<f64>();
        let direct: f64 = losses
            .iter()
            .zip(&plays)
            .map(|(f, x)| match f {
                RoundLoss::Linear { gradient } => gradient.dot(x),
                _ => unreachable!(),
            })
            .sum();
        assert_eq!(regret, direct);
    }
}
