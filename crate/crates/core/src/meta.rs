//! Exponentially weighted average forecaster over a doubling grid of step sizes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vector;

/// Which grid construction to use: the plain-OGD one or the one for experts with dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridFlavor {
    Basic,
    Dynamical,
}

/// Ascending step sizes `η_i = 2^{i−1}·η_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSizeGrid {
    etas: Vec<f64>,
    flavor: GridFlavor,
}

impl StepSizeGrid {
    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    pub fn flavor(&self) -> GridFlavor {
        self.flavor
    }

    /// Zero-based index `k` with `η_k ≤ η* ≤ 2η_k`, if any.
    pub fn covering_index(&self, eta_star: f64) -> Option<usize> {
        self.etas
            .iter()
            .position(|&eta| eta <= eta_star && eta_star <= 2.0 * eta)
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {x}")))
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        Err(Error::invalid("horizon T must be at least 1"))
    } else {
        Ok(())
    }
}

/// Number of experts: `⌈½log₂(1 + 4T/7)⌉ + 1` (basic) or `⌈½log₂(1 + 2T)⌉ + 1` (dynamical).
pub fn grid_size(horizon: usize, flavor: GridFlavor) -> usize {
    let t = horizon as f64;
    let arg = match flavor {
        GridFlavor::Basic => 1.0 + 4.0 * t / 7.0,
        GridFlavor::Dynamical => 1.0 + 2.0 * t,
    };
    (0.5 * arg.log2()).ceil() as usize + 1
}

pub fn build_grid(horizon: usize, diameter: f64, grad_bound: f64, flavor: GridFlavor) -> Result<StepSizeGrid> {
    check_horizon(horizon)?;
    check_positive("diameter D", diameter)?;
    check_positive("gradient bound G", grad_bound)?;
    let t = horizon as f64;
    let first = match flavor {
        GridFlavor::Basic => diameter / grad_bound * (7.0 / (2.0 * t)).sqrt(),
        GridFlavor::Dynamical => diameter / grad_bound * (1.0 / t).sqrt(),
    };
    let n = grid_size(horizon, flavor);
    let mut etas = Vec::with_capacity(n);
    let mut eta = first;
    for _ in 0..n {
        etas.push(eta);
        eta *= 2.0;
    }
    Ok(StepSizeGrid { etas, flavor })
}

/// Step size minimizing the single-expert bound for path-length `p`.
///
/// Basic: `√((7D² + 4DP)/(2TG²))`; dynamical: `√((D² + 2DP')/(TG²))`.
pub fn optimal_step(p: f64, horizon: usize, diameter: f64, grad_bound: f64, flavor: GridFlavor) -> f64 {
    let (t, d, g) = (horizon as f64, diameter, grad_bound);
    match flavor {
        GridFlavor::Basic => ((7.0 * d * d + 4.0 * d * p) / (2.0 * t * g * g)).sqrt(),
        GridFlavor::Dynamical => ((d * d + 2.0 * d * p) / (t * g * g)).sqrt(),
    }
}

/// One-based grid index whose step size 2-approximates [`optimal_step`]:
/// `⌊½log₂(1 + 4P/(7D))⌋ + 1` (basic) or `⌊½log₂(1 + 2P'/D)⌋ + 1` (dynamical).
pub fn k_index(p: f64, diameter: f64, flavor: GridFlavor) -> usize {
    let arg = match flavor {
        GridFlavor::Basic => 1.0 + 4.0 * p / (7.0 * diameter),
        GridFlavor::Dynamical => 1.0 + 2.0 * p / diameter,
    };
    (0.5 * arg.log2()).floor() as usize + 1
}

/// Prior `w_i = C/(i(i+1))` with `C = 1 + 1/N`.
pub fn init_weights(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("need at least one expert"));
    }
    let c = 1.0 + 1.0 / n as f64;
    Ok((1..=n).map(|i| c / (i as f64 * (i as f64 + 1.0))).collect())
}

/// How the meta step size is tuned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flavor", rename_all = "kebab-case")]
pub enum AlphaTuning {
    /// True losses with range `c`: `α = √(8/(Tc²))`.
    Basic { c: f64 },
    /// Surrogate losses: `α = √(2/(TG²D²))`.
    Surrogate { g: f64, d: f64 },
}

impl AlphaTuning {
    /// Width of the interval the meta-level losses live in.
    pub fn loss_range(&self) -> f64 {
        match *self {
            AlphaTuning::Basic { c } => c,
            AlphaTuning::Surrogate { g, d } => 2.0 * g * d,
        }
    }
}

pub fn tune_alpha(horizon: usize, tuning: AlphaTuning) -> Result<f64> {
    check_horizon(horizon)?;
    let t = horizon as f64;
    match tuning {
        AlphaTuning::Basic { c } => {
            check_positive("loss range c", c)?;
            Ok((8.0 / (t * c * c)).sqrt())
        }
        AlphaTuning::Surrogate { g, d } => {
            check_positive("gradient bound G", g)?;
            check_positive("diameter D", d)?;
            Ok((2.0 / (t * g * g * d * d)).sqrt())
        }
    }
}

/// `Σ w_i x_i`
pub fn combine(weights: &[f64], plays: &[Vector]) -> Result<Vector> {
    if weights.len() != plays.len() || plays.is_empty() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            found: plays.len(),
        });
    }
    let mut out = Vector::zeros(plays[0].dim());
    for (w, x) in weights.iter().zip(plays) {
        out.check_dim(x)?;
        out = out.add_scaled(*w, x);
    }
    Ok(out)
}

/// Weights over the grid, stored as prior plus cumulative loss per expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaState {
    alpha: f64,
    prior: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    rounds: usize,
}

impl MetaState {
    pub fn new(prior: Vec<f64>, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::invalid(format!("meta step size must be >= 0, got {alpha}")));
        }
        if prior.is_empty() {
            return Err(Error::invalid("need at least one expert"));
        }
        let sum: f64 = prior.iter().sum();
        if prior.iter().any(|w| !(w.is_finite() && *w > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("prior weights must be positive and sum to 1"));
        }
        let n = prior.len();
        Ok(MetaState {
            alpha,
            weights: prior.clone(),
            prior,
            cumulative: vec![0.0; n],
            rounds: 0,
        })
    }

    /// Prior from [`init_weights`].
    pub fn for_grid(grid: &StepSizeGrid, alpha: f64) -> Result<Self> {
        Self::new(init_weights(grid.len())?, alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// Per-expert losses accumulated so far.
    pub fn cumulative_losses(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn combine(&self, plays: &[Vector]) -> Result<Vector> {
        combine(&self.weights, plays)
    }

    /// Exponential-weights update with one loss per expert.
    ///
    /// Computed as `w ∝ w_1·exp(−α·L)` on the cumulative losses `L`, shifted by the
    /// largest exponent before exponentiating.
    pub fn update(&self, losses: &[f64]) -> Result<MetaState> {
        if losses.len() != self.prior.len() {
            return Err(Error::LengthMismatch {
                expected: self.prior.len(),
                found: losses.len(),
            });
        }
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite {
                round: self.rounds,
                what: "expert loss",
            });
        }
        let cumulative: Vec<f64> = self.cumulative.iter().zip(losses).map(|(c, l)| c + l).collect();
        let exponents: Vec<f64> = self
            .prior
            .iter()
            .zip(&cumulative)
            .map(|(p, c)| p.ln() - self.alpha * c)
            .collect();
        let shift = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = exponents.iter().map(|e| (e - shift).exp()).collect();
        let total: f64 = raw.iter().sum();
        Ok(MetaState {
            alpha: self.alpha,
            prior: self.prior.clone(),
            weights: raw.iter().map(|w| w / total).collect(),
            cumulative,
            rounds: self.rounds + 1,
        })
    }

    /// Right-hand side of the meta-regret guarantee:
    /// `min_i [L_i + ln(1/w_1^i)/α] + α·T·range²/8`, with the minimizing index
    /// (ties go to the smaller step size).
    pub fn regret_bound(&self, range: f64) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, (l, p)) in self.cumulative.iter().zip(&self.prior).enumerate() {
            let term = l + (1.0 / p).ln() / self.alpha;
            if term < best.1 {
                best = (i, term);
            }
        }
        let t = self.rounds as f64;
        (best.0, best.1 + self.alpha * t * range * range / 8.0)
    }
}
