//! Vectors, the feasible ball, and Euclidean projection.
//!
//! The domain is always an origin-centered Euclidean ball of diameter `D`,
//! which contains the origin and makes projection a radial rescale.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or direction in `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Builds a vector, rejecting empty input and NaN/Inf coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("vector dimension must be at least 1"));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("coordinate {i} is not finite")));
        }
        Ok(Vector(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    /// Unit vector along `axis`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        Vector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn check_dim(&self, other: &Vector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    /// Inner product. Panics on dimension mismatch; use [`Vector::try_dot`] at API boundaries.
    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dot: dimension mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn try_dot(&self, other: &Vector) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.dot(other))
    }

    pub fn scale(&self, k: f64) -> Vector {
        Vector(self.0.iter().map(|c| k * c).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "add: dimension mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "sub: dimension mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + k * dir`
    pub fn add_scaled(&self, k: f64, dir: &Vector) -> Vector {
        assert_eq!(self.dim(), dir.dim(), "add_scaled: dimension mismatch");
        Vector(self.0.iter().zip(&dir.0).map(|(a, b)| a + k * b).collect())
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Euclidean distance `‖x − y‖₂`.
pub fn distance(x: &Vector, y: &Vector) -> Result<f64> {
    x.check_dim(y)?;
    Ok(x.0
        .iter()
        .zip(&y.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// The origin-centered ball `{x : ‖x‖₂ ≤ D/2}` in `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet {
    dim: usize,
    diameter: f64,
}

impl FeasibleSet {
    pub fn ball(dim: usize, diameter: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(diameter.is_finite() && diameter > 0.0) {
            return Err(Error::invalid(format!(
                "diameter must be positive and finite, got {diameter}"
            )));
        }
        Ok(FeasibleSet { dim, diameter })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn radius(&self) -> f64 {
        self.diameter / 2.0
    }

    pub fn origin(&self) -> Vector {
        Vector::zeros(self.dim)
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

    /// Membership with an absolute slack on the radius.
    pub fn contains(&self, x: &Vector, slack: f64) -> bool {
        x.dim() == self.dim && x.norm() <= self.radius() + slack
    }

    /// Euclidean projection onto the ball. Points already inside are returned unchanged.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &Vector) -> Vector {
        let norm = x.norm();
        let r = self.radius();
        // Rescaled points can land a few ulps outside the sphere; treating
        // those as inside keeps the projection idempotent.
        if norm <= r * (1.0 + 4.0 * f64::EPSILON) {
            x.clone()
        } else {
            x.scale(r / norm)
        }
    }

    /// Point on the boundary sphere in direction `-dir`, or the origin when `dir = 0`.
    /// This is the minimizer of `⟨dir, x⟩` over the ball.
    pub fn minimize_linear(&self, dir: &Vector) -> Vector {
        let norm = dir.norm();
        if norm == 0.0 {
            self.origin()
        } else {
            dir.scale(-self.radius() / norm)
        }
    }

    /// Uniform sample from the ball.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let dir = random_unit(self.dim, rng);
        let u: f64 = rng.random();
        dir.scale(self.radius() * u.powf(1.0 / self.dim as f64))
    }
}

/// Uniformly distributed direction on the unit sphere in `R^dim`.
pub fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let v = Vector(v);
        let n = v.norm();
        if n > 1e-12 {
            return v.scale(1.0 / n);
        }
    }
}
