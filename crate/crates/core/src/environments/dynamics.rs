use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, FeasibleSet, Vector};

/// Contraction maps on the ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Contraction {
    Identity,
    /// `x ↦ ρx`
    Shrink { rho: f64 },
    /// Rotation by `angle` radians in the coordinate plane `(i, j)`.
    Rotation { plane: (usize, usize), angle: f64 },
    /// `x ↦ (1 − weight)·x + weight·anchor`
    TowardPoint { anchor: Vector, weight: f64 },
}

impl Contraction {
    fn apply(&self, x: &Vector) -> Vector {
        match self {
            Contraction::Identity => x.clone(),
            Contraction::Shrink { rho } => x.scale(*rho),
            Contraction::Rotation { plane: (i, j), angle } => {
                let (s, c) = angle.sin_cos();
                let mut y = x.clone();
                let (xi, xj) = (x[*i], x[*j]);
                y.coords_mut()[*i] = c * xi - s * xj;
                y.coords_mut()[*j] = s * xi + c * xj;
                y
            }
            Contraction::TowardPoint { anchor, weight } => {
                x.scale(1.0 - weight).add_scaled(*weight, anchor)
            }
        }
    }

    fn validate(&self, set: &FeasibleSet) -> Result<()> {
        match self {
            Contraction::Identity => Ok(()),
            Contraction::Shrink { rho } => {
                if rho.is_finite() && *rho > 0.0 && *rho <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("shrink factor must be in (0, 1], got {rho}")))
                }
            }
            Contraction::Rotation { plane: (i, j), angle } => {
                let d = set.dim();
                if i == j || *i >= d || *j >= d {
                    return Err(Error::invalid(format!(
                        "rotation plane ({i}, {j}) is not a pair of distinct axes below {d}"
                    )));
                }
                if !angle.is_finite() {
                    return Err(Error::invalid("rotation angle must be finite"));
                }
                Ok(())
            }
            Contraction::TowardPoint { anchor, weight } => {
                set.check_dim(anchor)?;
                if !set.contains(anchor, 0.0) {
                    return Err(Error::invalid("anchor point lies outside the domain"));
                }
                if !(weight.is_finite() && (0.0..=1.0).contains(weight)) {
                    return Err(Error::invalid(format!(
                        "blend weight must be in [0, 1], got {weight}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// A sequence of contraction maps `Φ_t`. The schedule is periodic: round `t`
/// uses `maps[t mod len]`, so a single map is time-invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicalModel {
    dim: usize,
    maps: Vec<Contraction>,
}

impl DynamicalModel {
    /// Builds a model without validating the maps. The runners audit it before use.
    pub fn from_maps_unchecked(dim: usize, maps: Vec<Contraction>) -> Self {
        assert!(!maps.is_empty(), "a dynamical model needs at least one map");
        DynamicalModel { dim, maps }
    }

    /// A validated periodic schedule.
    pub fn schedule(maps: Vec<Contraction>, set: &FeasibleSet) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::invalid("a dynamical model needs at least one map"));
        }
        for m in &maps {
            m.validate(set)?;
        }
        Ok(DynamicalModel { dim: set.dim(), maps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn maps(&self) -> &[Contraction] {
        &self.maps
    }

    pub fn is_identity(&self) -> bool {
        self.maps.iter().all(|m| matches!(m, Contraction::Identity))
    }

    pub fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        Ok(())
    }

    /// `Φ_t(x)` with `t` the zero-based round index.
    pub fn apply(&self, round: usize, x: &Vector) -> Vector {
        self.maps[round % self.maps.len()].apply(x)
    }
}

/// Validated single-map model.
pub fn make_contraction(kind: Contraction, set: &FeasibleSet) -> Result<DynamicalModel> {
    DynamicalModel::schedule(vec![kind], set)
}

/// Sampled check that every map is non-expansive and keeps the ball invariant.
pub fn audit_contraction(
    model: &DynamicalModel,
    set: &FeasibleSet,
    samples: usize,
    seed: u64,
) -> Result<()> {
    if model.dim() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            found: model.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius_slack = 1e-12 * set.radius().max(1.0);
    for (k, map) in model.maps().iter().enumerate() {
        for _ in 0..samples {
            let x = set.sample(&mut rng);
            let y = set.sample(&mut rng);
            let (fx, fy) = (map.apply(&x), map.apply(&y));
            let before = distance(&x, &y)?;
            let after = distance(&fx, &fy)?;
            if after > before * (1.0 + 1e-12) + 1e-300 {
                return Err(Error::ContractionViolated(format!(
                    "map {k} expands a pair from {before} to {after}"
                )));
            }
            if !set.contains(&fx, radius_slack) {
                return Err(Error::ContractionViolated(format!(
                    "map {k} sends a feasible point to norm {}",
                    fx.norm()
                )));
            }
        }
    }
    Ok(())
}
