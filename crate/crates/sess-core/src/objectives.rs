//! The three set objectives and their marginal gains.
//!
//! - `rep`: facility location, `F(S) = Σ_j max_{i∈S} sim(i, j)` summed over
//!   the whole pool (selected elements included).
//! - `lc`: modular uncertainty, `F(S) = Σ_{j∈S} (1 - c̃(j))`.
//! - `wrep`: weighted facility location, `F(S) = Σ_j w(j)·max_{i∈S} sim(i, j)`.
//!
//! `F(∅) = 0` for all three, so the gain of the first greedy pick equals its
//! objective value. On valid inputs (`sim ∈ [0, 1]`, `w ≥ 0`, `c̃ ∈ [0, 1]`)
//! each objective is non-negative, monotone, and submodular; the `oracle`
//! module checks those properties mechanically.
//!
//! Marginal gains avoid re-evaluating `F`: with the cover vector
//! `a_j = max_{i∈S} sim(i, j)` maintained by [`GreedyState`], adding `x`
//! contributes `max(sim(x, j) - a_j, 0)` at each `j`, which is O(N) per
//! candidate. Sums always accumulate in ascending `j`, so results are
//! bit-reproducible.

use alloc::vec::Vec;
use core::fmt;

use crate::confidence::{ConfidenceVector, WeightVector};
use crate::selection::GreedyState;
use crate::similarity::SimilarityMatrix;

/// Sorted set of distinct pool positions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Subset {
    positions: Vec<usize>,
}

impl Subset {
    /// Builds a subset from positions in any order, rejecting duplicates and
    /// positions at or beyond `n`.
    pub fn new(mut positions: Vec<usize>, n: usize) -> Result<Self, ObjectiveError> {
        positions.sort_unstable();
        for pair in positions.windows(2) {
            if pair[0] == pair[1] {
                return Err(ObjectiveError::DuplicatePosition(pair[0]));
            }
        }
        if let Some(&last) = positions.last() {
            if last >= n {
                return Err(ObjectiveError::IndexOutOfRange { position: last, n });
            }
        }
        Ok(Subset { positions })
    }

    pub fn empty() -> Self {
        Subset::default()
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn contains(&self, position: usize) -> bool {
        self.positions.binary_search(&position).is_ok()
    }

    /// Inserts a position, keeping the sort order. Duplicates are rejected.
    pub fn insert(&mut self, position: usize) -> Result<(), ObjectiveError> {
        match self.positions.binary_search(&position) {
            Ok(_) => Err(ObjectiveError::DuplicatePosition(position)),
            Err(at) => {
                self.positions.insert(at, position);
                Ok(())
            }
        }
    }
}

/// An objective together with the data it is evaluated against.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    Rep(&'a SimilarityMatrix),
    Lc(&'a ConfidenceVector),
    Wrep(&'a SimilarityMatrix, &'a WeightVector),
}

impl<'a> Objective<'a> {
    /// Pool size the objective data is aligned to.
    pub fn pool_size(&self) -> usize {
        match self {
            Objective::Rep(sim) => sim.n(),
            Objective::Lc(conf) => conf.len(),
            Objective::Wrep(sim, _) => sim.n(),
        }
    }

    /// Checks that paired data agree on the pool size.
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if let Objective::Wrep(sim, weights) = self {
            if sim.n() != weights.len() {
                return Err(ObjectiveError::SizeMismatch {
                    expected: sim.n(),
                    got: weights.len(),
                });
            }
        }
        Ok(())
    }

    /// Evaluates `F(S)` directly from the definition.
    pub fn eval(&self, subset: &Subset) -> Result<f64, ObjectiveError> {
        self.validate()?;
        match self {
            Objective::Rep(sim) => eval_rep(sim, subset),
            Objective::Lc(conf) => eval_lc(conf, subset),
            Objective::Wrep(sim, weights) => eval_wrep(sim, weights, subset),
        }
    }

    /// Marginal gain `F(S ∪ {x}) - F(S)` computed in O(N) from the cover
    /// vector, without re-evaluating `F`.
    pub fn marginal_gain(&self, state: &GreedyState, x: usize) -> Result<f64, ObjectiveError> {
        let n = self.pool_size();
        if x >= n {
            return Err(ObjectiveError::IndexOutOfRange { position: x, n });
        }
        if state.subset().contains(x) {
            return Err(ObjectiveError::AlreadySelected(x));
        }
        Ok(gain_from_cover(self, state.cover(), x))
    }
}

/// Gain kernel shared by `marginal_gain` and the greedy scans: assumes `x`
/// is in range and not yet selected.
pub(crate) fn gain_from_cover(objective: &Objective, cover: &[f64], x: usize) -> f64 {
    match objective {
        Objective::Rep(sim) => cover_gain(sim.row(x), cover, None),
        Objective::Lc(conf) => conf.uncertainty(x),
        Objective::Wrep(sim, weights) => cover_gain(sim.row(x), cover, Some(weights.weights())),
    }
}

fn cover_gain(row: &[f64], cover: &[f64], weights: Option<&[f64]>) -> f64 {
    let mut total = 0.0;
    match weights {
        None => {
            for (j, &s) in row.iter().enumerate() {
                let lift = s - cover[j];
                if lift > 0.0 {
                    total += lift;
                }
            }
        }
        Some(w) => {
            for (j, &s) in row.iter().enumerate() {
                let lift = s - cover[j];
                if lift > 0.0 {
                    total += w[j] * lift;
                }
            }
        }
    }
    total
}

/// Facility location: `Σ_j max_{i∈S} sim(i, j)`, 0 for the empty set.
pub fn eval_rep(sim: &SimilarityMatrix, subset: &Subset) -> Result<f64, ObjectiveError> {
    check_bounds(subset, sim.n())?;
    if subset.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for j in 0..sim.n() {
        total += best_cover(sim, subset, j);
    }
    Ok(total)
}

/// Modular uncertainty: `Σ_{j∈S} (1 - c̃(j))`, 0 for the empty set.
pub fn eval_lc(conf: &ConfidenceVector, subset: &Subset) -> Result<f64, ObjectiveError> {
    check_bounds(subset, conf.len())?;
    Ok(subset
        .positions()
        .iter()
        .map(|&j| conf.uncertainty(j))
        .sum())
}

/// Weighted facility location: `Σ_j w(j)·max_{i∈S} sim(i, j)`, 0 for the
/// empty set.
pub fn eval_wrep(
    sim: &SimilarityMatrix,
    weights: &WeightVector,
    subset: &Subset,
) -> Result<f64, ObjectiveError> {
    if sim.n() != weights.len() {
        return Err(ObjectiveError::SizeMismatch {
            expected: sim.n(),
            got: weights.len(),
        });
    }
    check_bounds(subset, sim.n())?;
    if subset.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for j in 0..sim.n() {
        total += weights.get(j) * best_cover(sim, subset, j);
    }
    Ok(total)
}

#[inline]
fn best_cover(sim: &SimilarityMatrix, subset: &Subset, j: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for &i in subset.positions() {
        let s = sim.get(i, j);
        if s > best {
            best = s;
        }
    }
    best
}

fn check_bounds(subset: &Subset, n: usize) -> Result<(), ObjectiveError> {
    match subset.positions().last() {
        Some(&last) if last >= n => Err(ObjectiveError::IndexOutOfRange { position: last, n }),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObjectiveError {
    IndexOutOfRange { position: usize, n: usize },
    DuplicatePosition(usize),
    SizeMismatch { expected: usize, got: usize },
    AlreadySelected(usize),
}

impl fmt::Display for ObjectiveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveError::IndexOutOfRange { position, n } => {
                write!(f, "position {position} out of range for pool of size {n}")
            }
            ObjectiveError::DuplicatePosition(p) => write!(f, "duplicate position {p}"),
            ObjectiveError::SizeMismatch { expected, got } => {
                write!(f, "objective data sized {got}, expected {expected}")
            }
            ObjectiveError::AlreadySelected(p) => {
                write!(f, "position {p} is already in the subset")
            }
        }
    }
}

impl core::error::Error for ObjectiveError {}
