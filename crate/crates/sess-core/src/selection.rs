//! Budgeted subset selection.
//!
//! The standard greedy rule — repeatedly add the candidate with the largest
//! marginal gain until `|S| = k` — plus two refinements: a lazy variant that
//! keeps stale gains in a max-priority queue and re-evaluates only what it
//! pops (valid because gains never grow as the cover does), and a direct
//! top-k sort for the modular `lc` objective. All three are deterministic:
//! ties break toward the lowest pool position, and the lazy and top-k paths
//! reproduce the naive pick sequence and gains exactly.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::time::Duration;

use crate::confidence::ConfidenceVector;
use crate::objectives::{gain_from_cover, Objective, ObjectiveError, Subset};

/// Which selection routine to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Naive,
    Lazy,
    TopK,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Naive => "naive",
            Algorithm::Lazy => "lazy",
            Algorithm::TopK => "topk",
        }
    }
}

/// Objective name carried through configs and result files. `Lc` and `Vlc`
/// share the same set function; they differ only in which confidence signal
/// fed it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveLabel {
    Rep,
    Lc,
    Vlc,
    Wrep,
}

impl ObjectiveLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveLabel::Rep => "rep",
            ObjectiveLabel::Lc => "lc",
            ObjectiveLabel::Vlc => "vlc",
            ObjectiveLabel::Wrep => "wrep",
        }
    }
}

/// Run parameters, echoed into every [`SelectionResult`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    /// Budget: number of examples to select.
    pub k: usize,
    /// Similarity mixing weight (recorded for provenance).
    pub alpha: f64,
    /// Difficulty weight used when building `wrep` weights.
    pub lambda: f64,
    pub algorithm: Algorithm,
    pub objective: ObjectiveLabel,
}

impl SelectionConfig {
    pub fn validate(&self, pool_size: usize) -> Result<(), SelectError> {
        if self.k == 0 {
            return Err(SelectError::ZeroBudget);
        }
        if self.k > pool_size {
            return Err(SelectError::BudgetExceedsPool {
                k: self.k,
                n: pool_size,
            });
        }
        if !self.alpha.is_finite() || !(0.0..=1.0).contains(&self.alpha) {
            return Err(SelectError::AlphaOutOfRange(self.alpha));
        }
        if !self.lambda.is_finite() || !(0.0..=1.0).contains(&self.lambda) {
            return Err(SelectError::LambdaOutOfRange(self.lambda));
        }
        Ok(())
    }
}

/// Mutable state of a greedy run: the subset so far, the cover vector
/// `a_j = max_{i∈S} sim(i, j)` (zero while `S = ∅`), and the running
/// objective value.
#[derive(Debug, Clone)]
pub struct GreedyState {
    subset: Subset,
    cover: Vec<f64>,
    objective_value: f64,
    selected: Vec<bool>,
}

impl GreedyState {
    pub fn new(pool_size: usize) -> Self {
        GreedyState {
            subset: Subset::empty(),
            cover: vec![0.0; pool_size],
            objective_value: 0.0,
            selected: vec![false; pool_size],
        }
    }

    pub fn subset(&self) -> &Subset {
        &self.subset
    }

    pub fn cover(&self) -> &[f64] {
        &self.cover
    }

    pub fn objective_value(&self) -> f64 {
        self.objective_value
    }

    #[inline]
    pub(crate) fn is_selected(&self, position: usize) -> bool {
        self.selected[position]
    }

    /// Adds `x` to the subset, updating the cover vector and objective value.
    /// Returns the marginal gain of the addition.
    pub fn apply(&mut self, objective: &Objective, x: usize) -> Result<f64, ObjectiveError> {
        let n = objective.pool_size();
        if x >= n {
            return Err(ObjectiveError::IndexOutOfRange { position: x, n });
        }
        if self.selected[x] {
            return Err(ObjectiveError::AlreadySelected(x));
        }
        let gain = gain_from_cover(objective, &self.cover, x);
        if let Objective::Rep(sim) | Objective::Wrep(sim, _) = objective {
            for (j, slot) in self.cover.iter_mut().enumerate() {
                let s = sim.get(x, j);
                if s > *slot {
                    *slot = s;
                }
            }
        }
        self.subset.insert(x)?;
        self.selected[x] = true;
        self.objective_value += gain;
        Ok(gain)
    }

    /// On-demand invariant check: the cover vector matches a from-scratch
    /// recomputation exactly and the running value matches a direct
    /// evaluation within `1e-9`.
    pub fn verify(&self, objective: &Objective) -> bool {
        if let Objective::Rep(sim) | Objective::Wrep(sim, _) = objective {
            for (j, &a) in self.cover.iter().enumerate() {
                let expected = self
                    .subset
                    .positions()
                    .iter()
                    .fold(0.0f64, |acc, &i| acc.max(sim.get(i, j)));
                if a != expected {
                    return false;
                }
            }
        }
        match objective.eval(&self.subset) {
            Ok(direct) => (direct - self.objective_value).abs() < 1e-9,
            Err(_) => false,
        }
    }
}

/// Outcome of a selection run: positions in pick order, per-step gains, and
/// the final objective value (the sum of the gains, since `F(∅) = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub chosen: Vec<usize>,
    pub gains: Vec<f64>,
    pub final_value: f64,
    pub config: SelectionConfig,
    /// Filled in by callers that have a clock; selection itself is pure.
    pub wall_time: Option<Duration>,
}

/// Dispatches to the routine named by `config.algorithm`.
pub fn run(
    objective: &Objective,
    config: &SelectionConfig,
) -> Result<SelectionResult, SelectError> {
    match config.algorithm {
        Algorithm::Naive => greedy_select(objective, config),
        Algorithm::Lazy => lazy_greedy_select(objective, config),
        Algorithm::TopK => match objective {
            Objective::Lc(conf) => topk_select(conf, config),
            _ => Err(SelectError::TopKNeedsModularObjective),
        },
    }
}

/// Naive greedy: at each of the `k` steps, scan every remaining candidate's
/// marginal gain (O(N) each via the cover vector) and take the best, ties to
/// the lowest pool position.
pub fn greedy_select(
    objective: &Objective,
    config: &SelectionConfig,
) -> Result<SelectionResult, SelectError> {
    objective.validate()?;
    let n = objective.pool_size();
    config.validate(n)?;

    let mut state = GreedyState::new(n);
    let mut chosen = Vec::with_capacity(config.k);
    let mut gains = Vec::with_capacity(config.k);
    for _ in 0..config.k {
        let best = best_candidate(objective, &state).expect("k <= n leaves a candidate");
        let gain = state.apply(objective, best)?;
        chosen.push(best);
        gains.push(gain);
    }
    Ok(SelectionResult {
        chosen,
        gains,
        final_value: state.objective_value(),
        config: *config,
        wall_time: None,
    })
}

/// Lazy greedy: cached gains are upper bounds (gains only shrink as the
/// cover grows), so candidates sit in a max-heap keyed by `(gain, lowest
/// position)` and are re-evaluated only when popped. A popped entry whose
/// gain was computed during the current step is the true argmax under the
/// same tie-break as the naive scan, so the pick sequence and gains are
/// identical.
pub fn lazy_greedy_select(
    objective: &Objective,
    config: &SelectionConfig,
) -> Result<SelectionResult, SelectError> {
    objective.validate()?;
    let n = objective.pool_size();
    config.validate(n)?;

    let mut state = GreedyState::new(n);
    let mut heap: BinaryHeap<HeapEntry> = (0..n)
        .map(|pos| HeapEntry {
            gain: gain_from_cover(objective, state.cover(), pos),
            pos,
            stamp: 0,
        })
        .collect();

    let mut chosen = Vec::with_capacity(config.k);
    let mut gains = Vec::with_capacity(config.k);
    for step in 0..config.k {
        loop {
            let top = heap.pop().expect("k <= n leaves a candidate");
            if top.stamp == step {
                let gain = state.apply(objective, top.pos)?;
                chosen.push(top.pos);
                gains.push(gain);
                break;
            }
            heap.push(HeapEntry {
                gain: gain_from_cover(objective, state.cover(), top.pos),
                pos: top.pos,
                stamp: step,
            });
        }
    }
    Ok(SelectionResult {
        chosen,
        gains,
        final_value: state.objective_value(),
        config: *config,
        wall_time: None,
    })
}

/// Top-k by uncertainty `1 - c̃(j)`, descending, ties to the lowest position.
/// For the modular `lc` objective this equals the greedy solution.
pub fn topk_select(
    conf: &ConfidenceVector,
    config: &SelectionConfig,
) -> Result<SelectionResult, SelectError> {
    let n = conf.len();
    config.validate(n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        conf.uncertainty(b)
            .partial_cmp(&conf.uncertainty(a))
            .expect("confidences are finite")
            .then_with(|| a.cmp(&b))
    });
    order.truncate(config.k);

    let gains: Vec<f64> = order.iter().map(|&j| conf.uncertainty(j)).collect();
    // Same left-to-right accumulation the greedy state performs.
    let final_value = gains.iter().fold(0.0, |acc, &g| acc + g);
    Ok(SelectionResult {
        chosen: order,
        gains,
        final_value,
        config: *config,
        wall_time: None,
    })
}

/// Best remaining candidate under the `(gain, lowest position)` order.
///
/// The parallel path reduces with the same total order; max of a total order
/// is associative and commutative, so the split schedule cannot change the
/// winner.
fn best_candidate(objective: &Objective, state: &GreedyState) -> Option<usize> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..objective.pool_size())
            .into_par_iter()
            .filter(|&pos| !state.is_selected(pos))
            .map(|pos| Candidate {
                gain: gain_from_cover(objective, state.cover(), pos),
                pos,
            })
            .reduce_with(Candidate::better)
            .map(|c| c.pos)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..objective.pool_size())
            .filter(|&pos| !state.is_selected(pos))
            .map(|pos| Candidate {
                gain: gain_from_cover(objective, state.cover(), pos),
                pos,
            })
            .reduce(Candidate::better)
            .map(|c| c.pos)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    pos: usize,
}

impl Candidate {
    fn better(a: Candidate, b: Candidate) -> Candidate {
        if b.gain > a.gain || (b.gain == a.gain && b.pos < a.pos) {
            b
        } else {
            a
        }
    }
}

#[derive(Debug)]
struct HeapEntry {
    gain: f64,
    pos: usize,
    stamp: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.gain == other.gain && self.pos == other.pos
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: highest gain first, then lowest position.
        self.gain
            .partial_cmp(&other.gain)
            .expect("gains are finite")
            .then_with(|| other.pos.cmp(&self.pos))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectError {
    ZeroBudget,
    BudgetExceedsPool { k: usize, n: usize },
    AlphaOutOfRange(f64),
    LambdaOutOfRange(f64),
    TopKNeedsModularObjective,
    Objective(ObjectiveError),
}

impl From<ObjectiveError> for SelectError {
    fn from(err: ObjectiveError) -> Self {
        SelectError::Objective(err)
    }
}

impl fmt::Display for SelectError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectError::ZeroBudget => f.write_str("budget must be at least 1"),
            SelectError::BudgetExceedsPool { k, n } => {
                write!(f, "budget {k} exceeds pool size {n}")
            }
            SelectError::AlphaOutOfRange(a) => {
                write!(f, "alpha must lie in [0, 1], got {a}")
            }
            SelectError::LambdaOutOfRange(l) => {
                write!(f, "lambda must lie in [0, 1], got {l}")
            }
            SelectError::TopKNeedsModularObjective => {
                f.write_str("topk applies only to the lc/vlc objective")
            }
            SelectError::Objective(err) => err.fmt(f),
        }
    }
}

impl core::error::Error for SelectError {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::SimilarityMatrix;
    use alloc::vec;

    fn sim3() -> SimilarityMatrix {
        SimilarityMatrix::from_entries(3, vec![1.0, 0.8, 0.2, 0.8, 1.0, 0.4, 0.2, 0.4, 1.0])
            .unwrap()
    }

    fn config(k: usize, algorithm: Algorithm, objective: ObjectiveLabel) -> SelectionConfig {
        SelectionConfig {
            k,
            alpha: 0.7,
            lambda: 0.5,
            algorithm,
            objective,
        }
    }

    #[test]
    fn greedy_picks_best_row_sum_first() {
        let sim = sim3();
        let result = greedy_select(
            &Objective::Rep(&sim),
            &config(1, Algorithm::Naive, ObjectiveLabel::Rep),
        )
        .unwrap();
        assert_eq!(result.chosen, vec![1]);
        assert!((result.final_value - 2.2).abs() < 1e-12);
    }

    #[test]
    fn greedy_two_steps_match_hand_run() {
        let sim = sim3();
        let result = greedy_select(
            &Objective::Rep(&sim),
            &config(2, Algorithm::Naive, ObjectiveLabel::Rep),
        )
        .unwrap();
        assert_eq!(result.chosen, vec![1, 2]);
        assert!((result.gains[0] - 2.2).abs() < 1e-12);
        assert!((result.gains[1] - 0.6).abs() < 1e-12);
        assert!((result.final_value - 2.8).abs() < 1e-12);
    }

    #[test]
    fn greedy_on_lc_orders_by_uncertainty() {
        let conf = ConfidenceVector::new(vec![0.9, 0.1, 0.5]).unwrap();
        let result = greedy_select(
            &Objective::Lc(&conf),
            &config(2, Algorithm::Naive, ObjectiveLabel::Lc),
        )
        .unwrap();
        assert_eq!(result.chosen, vec![1, 2]);
    }

    #[test]
    fn budget_validation() {
        let sim = sim3();
        let objective = Objective::Rep(&sim);
        assert_eq!(
            greedy_select(
                &objective,
                &config(4, Algorithm::Naive, ObjectiveLabel::Rep)
            ),
            Err(SelectError::BudgetExceedsPool { k: 4, n: 3 })
        );
        assert_eq!(
            greedy_select(
                &objective,
                &config(0, Algorithm::Naive, ObjectiveLabel::Rep)
            ),
            Err(SelectError::ZeroBudget)
        );
    }

    #[test]
    fn lazy_equals_naive_on_the_worked_example() {
        let sim = sim3();
        let objective = Objective::Rep(&sim);
        for k in 1..=3 {
            let naive = greedy_select(
                &objective,
                &config(k, Algorithm::Naive, ObjectiveLabel::Rep),
            )
            .unwrap();
            let lazy =
                lazy_greedy_select(&objective, &config(k, Algorithm::Lazy, ObjectiveLabel::Rep))
                    .unwrap();
            assert_eq!(naive.chosen, lazy.chosen);
            assert_eq!(naive.gains, lazy.gains);
            assert_eq!(naive.final_value, lazy.final_value);
        }
    }

    #[test]
    fn lazy_with_full_budget_is_a_permutation() {
        let sim = sim3();
        let result = lazy_greedy_select(
            &Objective::Rep(&sim),
            &config(3, Algorithm::Lazy, ObjectiveLabel::Rep),
        )
        .unwrap();
        let mut sorted = result.chosen.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn topk_orders_and_breaks_ties_low_position() {
        let conf = ConfidenceVector::new(vec![0.9, 0.1, 0.5]).unwrap();
        let result = topk_select(&conf, &config(2, Algorithm::TopK, ObjectiveLabel::Lc)).unwrap();
        assert_eq!(result.chosen, vec![1, 2]);
        assert!((result.gains[0] - 0.9).abs() < 1e-15);

        let tied = ConfidenceVector::new(vec![0.4, 0.4, 0.4]).unwrap();
        let result = topk_select(&tied, &config(3, Algorithm::TopK, ObjectiveLabel::Lc)).unwrap();
        assert_eq!(result.chosen, vec![0, 1, 2]);
    }

    #[test]
    fn topk_matches_greedy_on_lc_exactly() {
        let conf = ConfidenceVector::new(vec![0.25, 0.75, 0.5, 0.0, 1.0]).unwrap();
        let objective = Objective::Lc(&conf);
        for k in 1..=5 {
            let greedy =
                greedy_select(&objective, &config(k, Algorithm::Naive, ObjectiveLabel::Lc))
                    .unwrap();
            let topk = topk_select(&conf, &config(k, Algorithm::TopK, ObjectiveLabel::Lc)).unwrap();
            assert_eq!(greedy.chosen, topk.chosen);
            assert_eq!(greedy.gains, topk.gains);
            assert_eq!(greedy.final_value, topk.final_value);
        }
    }

    #[test]
    fn run_rejects_topk_on_rep() {
        let sim = sim3();
        assert_eq!(
            run(
                &Objective::Rep(&sim),
                &config(1, Algorithm::TopK, ObjectiveLabel::Rep)
            ),
            Err(SelectError::TopKNeedsModularObjective)
        );
    }

    #[test]
    fn state_invariants_hold_during_a_run() {
        let sim = sim3();
        let objective = Objective::Rep(&sim);
        let mut state = GreedyState::new(3);
        assert!(state.verify(&objective));
        state.apply(&objective, 1).unwrap();
        assert!(state.verify(&objective));
        state.apply(&objective, 2).unwrap();
        assert!(state.verify(&objective));
        assert!((state.objective_value() - 2.8).abs() < 1e-12);
    }
}
