use serde::{Deserialize, Serialize};

use super::{DynamicalModel, LossFunction, LossShape};
use crate::error::{Error, Result};
use crate::geometry::{distance, FeasibleSet, Vector};

/// Grid points per axis used by [`grid_search_block`].
pub const GRID_RESOLUTION: usize = 201;

/// Largest dimension for which the grid-search fallback is attempted.
const GRID_MAX_DIM: usize = 3;

/// A feasible comparator sequence `u_1, …, u_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComparatorSequence(Vec<Vector>);

impl ComparatorSequence {
    /// Validates dimension and membership (relative slack 1e-9 on the radius).
    pub fn new(points: Vec<Vector>, set: &FeasibleSet) -> Result<Self> {
        let slack = 1e-9 * set.radius();
        for (t, p) in points.iter().enumerate() {
            set.check_dim(p)?;
            if !set.contains(p, slack) {
                return Err(Error::invalid(format!(
                    "comparator point {t} has norm {} outside the radius {}",
                    p.norm(),
                    set.radius()
                )));
            }
        }
        Ok(ComparatorSequence(points))
    }

    pub fn points(&self) -> &[Vector] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `Σ_{t=2..T} ‖u_t − u_{t−1}‖₂`
pub fn path_length(u: &ComparatorSequence) -> Result<f64> {
    if u.is_empty() {
        return Err(Error::invalid("path length of an empty sequence"));
    }
    u.0.windows(2)
        .map(|w| distance(&w[1], &w[0]))
        .sum()
}

/// `Σ_{t=1..T−1} ‖u_{t+1} − Φ_t(u_t)‖₂`.
///
/// The final term of the open-ended sum is dropped (equivalently `u_{T+1} = Φ_T(u_T)`),
/// so the identity model gives exactly [`path_length`].
pub fn dynamic_path_length(u: &ComparatorSequence, model: &DynamicalModel) -> Result<f64> {
    if u.is_empty() {
        return Err(Error::invalid("dynamic path length of an empty sequence"));
    }
    let mut total = 0.0;
    for (t, w) in u.0.windows(2).enumerate() {
        model.check_dim(&w[0])?;
        total += distance(&w[1], &model.apply(t, &w[0]))?;
    }
    Ok(total)
}

/// Contiguous, non-empty blocks covering rounds `0..T`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    blocks: Vec<std::ops::Range<usize>>,
}

impl BlockPartition {
    /// `count` blocks of length `⌊T/count⌋`; the last block absorbs the remainder.
    pub fn even(horizon: usize, count: usize) -> Result<Self> {
        if count == 0 || count > horizon {
            return Err(Error::invalid(format!(
                "block count must be in [1, {horizon}], got {count}"
            )));
        }
        let len = horizon / count;
        let blocks = (0..count)
            .map(|i| {
                let end = if i + 1 == count { horizon } else { (i + 1) * len };
                i * len..end
            })
            .collect();
        Ok(BlockPartition { blocks })
    }

    /// A single block spanning the horizon.
    pub fn whole(horizon: usize) -> Result<Self> {
        Self::even(horizon, 1)
    }

    /// One block per round.
    pub fn singletons(horizon: usize) -> Result<Self> {
        Self::even(horizon, horizon)
    }

    /// Blocks starting at the given sorted round indices (the first must be 0).
    pub fn from_starts(horizon: usize, starts: &[usize]) -> Result<Self> {
        if starts.first() != Some(&0) || starts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("block starts must begin at 0 and increase"));
        }
        if *starts.last().unwrap() >= horizon {
            return Err(Error::invalid("block start beyond the horizon"));
        }
        let blocks = starts
            .iter()
            .enumerate()
            .map(|(i, &s)| s..starts.get(i + 1).copied().unwrap_or(horizon))
            .collect();
        Ok(BlockPartition { blocks })
    }

    pub fn blocks(&self) -> &[std::ops::Range<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }
}

/// Per block, the feasible point minimizing the block's summed loss, repeated over the block.
///
/// Linear blocks use the closed form `−(D/2)·ḡ/‖ḡ‖` (origin when `ḡ = 0`); blocks of
/// unit-curvature quadratics use the projected mean target. Anything else falls back to
/// [`grid_search_block`], which is refused above three dimensions.
pub fn best_block_comparators<L: LossFunction>(
    losses: &[L],
    blocks: &BlockPartition,
    set: &FeasibleSet,
) -> Result<ComparatorSequence> {
    if blocks.horizon() != losses.len() {
        return Err(Error::LengthMismatch {
            expected: losses.len(),
            found: blocks.horizon(),
        });
    }
    let mut points = Vec::with_capacity(losses.len());
    for block in blocks.blocks() {
        let best = block_minimizer(&losses[block.clone()], set)?;
        points.extend(std::iter::repeat_n(best, block.len()));
    }
    ComparatorSequence::new(points, set)
}

fn block_minimizer<L: LossFunction>(block: &[L], set: &FeasibleSet) -> Result<Vector> {
    let mut sum = set.origin();
    let mut all_linear = true;
    let mut all_quadratic = true;
    for f in block {
        match f.shape() {
            LossShape::Linear(g) => {
                set.check_dim(g)?;
                all_quadratic = false;
                sum = sum.add(g);
            }
            LossShape::Quadratic(theta) => {
                set.check_dim(theta)?;
                all_linear = false;
                sum = sum.add(theta);
            }
            LossShape::General => {
                all_linear = false;
                all_quadratic = false;
            }
        }
    }
    if all_linear {
        Ok(set.minimize_linear(&sum))
    } else if all_quadratic {
        Ok(set.project_unchecked(&sum.scale(1.0 / block.len() as f64)))
    } else {
        grid_search_block(block, set)
    }
}

/// Brute-force minimizer of `Σ f` over a `201^d` grid on the bounding cube, restricted to
/// the ball. Exact ties go to the point nearest the origin.
pub fn grid_search_block<L: LossFunction>(block: &[L], set: &FeasibleSet) -> Result<Vector> {
    let dim = set.dim();
    if dim > GRID_MAX_DIM {
        return Err(Error::Unsupported(format!(
            "grid search is limited to d <= {GRID_MAX_DIM}, got d = {dim}"
        )));
    }
    let r = set.radius();
    let half = (GRID_RESOLUTION - 1) as f64 / 2.0;
    let coord = |i: usize| r * (i as f64 - half) / half;

    let mut idx = vec![0usize; dim];
    let mut point = Vector::zeros(dim);
    let mut best: Option<(f64, f64, Vector)> = None;
    loop {
        for (k, &i) in idx.iter().enumerate() {
            point.coords_mut()[k] = coord(i);
        }
        let norm = point.norm();
        if norm <= r {
            let value: f64 = block.iter().map(|f| f.value(&point)).sum();
            let better = match &best {
                None => true,
                Some((bv, bn, _)) => value < *bv || (value == *bv && norm < *bn),
            };
            if better {
                best = Some((value, norm, point.clone()));
            }
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == dim {
                return Ok(best.expect("grid contains the origin").2);
            }
            idx[k] += 1;
            if idx[k] < GRID_RESOLUTION {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
