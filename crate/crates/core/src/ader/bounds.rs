use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::{k_index, GridFlavor};

/// The closed-form regret guarantees that apply to the runners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Constant-step OGD: `7D²/(4η) + DP/η + ηTG²/2`.
    Ogd,
    /// Ader with true losses: `¾G√(2T(7D²+4DP)) + (c√(2T)/4)[1+2ln(k+1)]`.
    AderBasic,
    /// Ader with surrogate losses: `¾G√(2T(7D²+4DP)) + (GD√(2T)/2)[1+2ln(k+1)]`.
    AderImproved,
    /// Ader with dynamical experts: `(3G/2)√(T(D²+2DP')) + (c√(2T)/4)[1+2ln(k+1)]`.
    AderDynamical,
    /// OGD followed by dynamics: `D²/(2η) + DP'/η + ηTG²/2`.
    OgdDynamical,
}

impl Theorem {
    /// Stable numeric id (1, 3, 4, 5 or 6).
    pub fn id(self) -> u8 {
        match self {
            Theorem::Ogd => 1,
            Theorem::AderBasic => 3,
            Theorem::AderImproved => 4,
            Theorem::AderDynamical => 5,
            Theorem::OgdDynamical => 6,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Theorem::Ogd),
            3 => Ok(Theorem::AderBasic),
            4 => Ok(Theorem::AderImproved),
            5 => Ok(Theorem::AderDynamical),
            6 => Ok(Theorem::OgdDynamical),
            _ => Err(Error::invalid(format!(
                "unknown theorem id {id}; expected one of 1, 3, 4, 5, 6"
            ))),
        }
    }

    /// Whether the bound is stated in terms of the dynamic path-length `P'`.
    pub fn uses_dynamics(self) -> bool {
        matches!(self, Theorem::AderDynamical | Theorem::OgdDynamical)
    }
}

/// Inputs to [`bound_value`]. `path` is `P` or `P'` depending on the theorem;
/// `eta` is only read by the OGD bounds and `c` only by the meta-level ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub diameter: f64,
    pub grad_bound: f64,
    pub loss_range: f64,
    pub horizon: usize,
    pub eta: Option<f64>,
    pub path: f64,
}

fn meta_term(scale: f64, k: usize) -> f64 {
    scale * (1.0 + 2.0 * ((k + 1) as f64).ln())
}

pub fn bound_value(theorem: Theorem, p: &BoundParams) -> Result<f64> {
    let (d, g, c, t) = (p.diameter, p.grad_bound, p.loss_range, p.horizon as f64);
    if !(d > 0.0 && g > 0.0 && t > 0.0) || !d.is_finite() || !g.is_finite() {
        return Err(Error::invalid("bound parameters D, G, T must be positive"));
    }
    if !(p.path.is_finite() && p.path >= 0.0) {
        return Err(Error::invalid(format!("path length must be >= 0, got {}", p.path)));
    }
    let eta = || -> Result<f64> {
        match p.eta {
            Some(e) if e.is_finite() && e > 0.0 => Ok(e),
            _ => Err(Error::invalid("OGD bounds need a positive step size")),
        }
    };
    let range = || -> Result<f64> {
        if c.is_finite() && c > 0.0 {
            Ok(c)
        } else {
            Err(Error::invalid("Ader bounds need a positive loss range c"))
        }
    };
    let path = p.path;
    Ok(match theorem {
        Theorem::Ogd => {
            let eta = eta()?;
            7.0 * d * d / (4.0 * eta) + d * path / eta + eta * t * g * g / 2.0
        }
        Theorem::OgdDynamical => {
            let eta = eta()?;
            d * d / (2.0 * eta) + d * path / eta + eta * t * g * g / 2.0
        }
        Theorem::AderBasic => {
            let k = k_index(path, d, GridFlavor::Basic);
            0.75 * g * (2.0 * t * (7.0 * d * d + 4.0 * d * path)).sqrt()
                + meta_term(range()? * (2.0 * t).sqrt() / 4.0, k)
        }
        Theorem::AderImproved => {
            let k = k_index(path, d, GridFlavor::Basic);
            0.75 * g * (2.0 * t * (7.0 * d * d + 4.0 * d * path)).sqrt()
                + meta_term(g * d * (2.0 * t).sqrt() / 2.0, k)
        }
        Theorem::AderDynamical => {
            let k = k_index(path, d, GridFlavor::Dynamical);
            1.5 * g * (t * (d * d + 2.0 * d * path)).sqrt()
                + meta_term(range()? * (2.0 * t).sqrt() / 4.0, k)
        }
    })
}
