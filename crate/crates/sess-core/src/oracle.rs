//! Ground-truth verification: an exhaustive subset optimizer and mechanical
//! checkers for the structural properties the greedy guarantee rests on.
//!
//! Everything here evaluates objectives directly from their definitions
//! (never through the cover-vector fast path), so these routines stay
//! independent of the implementation they are used to check.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::confidence::{compute_weights, ConfidenceVector, WeightVector};
use crate::corpus::EmbeddingTable;
use crate::objectives::{Objective, ObjectiveError, Subset};
use crate::similarity::{dense_similarity, SimilarityMatrix};

/// Tolerance for algebraic identity checks on unit-scale inputs.
pub const PROOF_CHECK_TOLERANCE: f64 = 1e-12;
/// Tolerance for composed computations with accumulated rounding.
pub const COMPOSED_TOLERANCE: f64 = 1e-9;

/// Largest number of subsets the exhaustive optimizer will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

/// Objective family a property check runs against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveFamily {
    Rep,
    Lc,
    Wrep,
}

impl ObjectiveFamily {
    pub const ALL: [ObjectiveFamily; 3] = [
        ObjectiveFamily::Rep,
        ObjectiveFamily::Lc,
        ObjectiveFamily::Wrep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveFamily::Rep => "rep",
            ObjectiveFamily::Lc => "lc",
            ObjectiveFamily::Wrep => "wrep",
        }
    }
}

/// Which structural property a report covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyCheck {
    Submodularity,
    Monotonicity,
}

impl PropertyCheck {
    pub fn as_str(self) -> &'static str {
        match self {
            PropertyCheck::Submodularity => "submodularity",
            PropertyCheck::Monotonicity => "monotonicity",
        }
    }
}

/// Findings of a randomized property check.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub check: PropertyCheck,
    pub family: ObjectiveFamily,
    pub trials: usize,
    pub violations: usize,
    /// Largest positive excess observed (0.0 when every trial satisfied the
    /// inequality outright).
    pub worst_violation: f64,
    pub seed: u64,
    pub tolerance: f64,
}

/// How random similarity matrices are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimRegime {
    /// `(1 + cos)/2` over random unit vectors — the production structure.
    UnitVectorCos,
    /// Arbitrary symmetric entries in `[0, 1]` with a unit diagonal.
    ArbitrarySymmetric,
}

/// Random objective data for one trial.
#[derive(Debug, Clone)]
pub enum InstanceData {
    Rep(SimilarityMatrix),
    Lc(ConfidenceVector),
    Wrep(SimilarityMatrix, WeightVector),
}

impl InstanceData {
    pub fn objective(&self) -> Objective<'_> {
        match self {
            InstanceData::Rep(sim) => Objective::Rep(sim),
            InstanceData::Lc(conf) => Objective::Lc(conf),
            InstanceData::Wrep(sim, w) => Objective::Wrep(sim, w),
        }
    }

    pub fn pool_size(&self) -> usize {
        self.objective().pool_size()
    }
}

/// Draws a random similarity matrix under the given regime. The unit-vector
/// regime uses low dimensions (2..=6), where cosines spread widely — the
/// harshest valid structure for the property checks.
pub fn random_similarity(n: usize, regime: SimRegime, rng: &mut impl Rng) -> SimilarityMatrix {
    match regime {
        SimRegime::UnitVectorCos => {
            let dim = rng.gen_range(2..=6);
            random_embedding_similarity(n, dim, rng)
        }
        SimRegime::ArbitrarySymmetric => {
            let mut entries = alloc::vec![0.0f64; n * n];
            for i in 0..n {
                entries[i * n + i] = 1.0;
                for j in (i + 1)..n {
                    let v: f64 = rng.gen();
                    entries[i * n + j] = v;
                    entries[j * n + i] = v;
                }
            }
            SimilarityMatrix::from_entries(n, entries).expect("symmetric in-range entries")
        }
    }
}

/// `(1 + cos)/2` similarity over `n` random Gaussian vectors of the given
/// dimension. Higher dimensions concentrate cosines the way real text
/// embeddings do.
pub fn random_embedding_similarity(n: usize, dim: usize, rng: &mut impl Rng) -> SimilarityMatrix {
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let v = loop {
            let v: Vec<f64> = (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            if v.iter().map(|x| x * x).sum::<f64>() > 1e-12 {
                break v;
            }
        };
        rows.push((alloc::format!("v{i}"), v));
    }
    let table = EmbeddingTable::from_rows(rows).expect("finite random vectors");
    dense_similarity(&table).expect("nonzero norms by construction")
}

/// Uniform confidences in `[0, 1]`.
pub fn random_confidence(n: usize, rng: &mut impl Rng) -> ConfidenceVector {
    ConfidenceVector::new((0..n).map(|_| rng.gen()).collect()).expect("values in range")
}

/// Weights derived from random confidences and a random λ.
pub fn random_weights(n: usize, rng: &mut impl Rng) -> WeightVector {
    let conf = random_confidence(n, rng);
    let lambda: f64 = rng.gen();
    compute_weights(&conf, lambda).expect("lambda in range")
}

/// Draws a full random instance for one objective family.
pub fn random_instance(
    family: ObjectiveFamily,
    n: usize,
    regime: SimRegime,
    rng: &mut impl Rng,
) -> InstanceData {
    match family {
        ObjectiveFamily::Rep => InstanceData::Rep(random_similarity(n, regime, rng)),
        ObjectiveFamily::Lc => InstanceData::Lc(random_confidence(n, rng)),
        ObjectiveFamily::Wrep => {
            InstanceData::Wrep(random_similarity(n, regime, rng), random_weights(n, rng))
        }
    }
}

/// Exhaustively maximizes the objective over all size-`k` subsets.
///
/// Subsets are visited in lexicographic order and strict improvement is
/// required to replace the incumbent, so the returned argmax is the
/// lexicographically smallest one.
pub fn brute_force_optimum(objective: &Objective, k: usize) -> Result<(Subset, f64), OracleError> {
    let n = objective.pool_size();
    if k > n {
        return Err(OracleError::BudgetExceedsPool { k, n });
    }
    let count = n_choose_k(n, k);
    if count > BRUTE_FORCE_LIMIT {
        return Err(OracleError::InstanceTooLarge { n, k });
    }
    if k == 0 {
        return Ok((Subset::empty(), 0.0));
    }

    let mut comb: Vec<usize> = (0..k).collect();
    let mut best_value = f64::NEG_INFINITY;
    let mut best: Vec<usize> = Vec::new();
    loop {
        let subset = Subset::new(comb.clone(), n).expect("combination is valid");
        let value = objective.eval(&subset)?;
        if value > best_value {
            best_value = value;
            best = comb.clone();
        }

        // Advance to the next combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                let subset = Subset::new(best, n).expect("argmax is valid");
                return Ok((subset, best_value));
            }
            i -= 1;
            if comb[i] != i + n - k {
                break;
            }
        }
        comb[i] += 1;
        for j in (i + 1)..k {
            comb[j] = comb[j - 1] + 1;
        }
    }
}

/// Samples random `(A ⊆ B, x ∉ B)` triples and checks the diminishing-returns
/// inequality `F(A∪{x}) - F(A) ≥ F(B∪{x}) - F(B)` within the tolerance.
///
/// Each trial draws a fresh instance (alternating both similarity regimes)
/// with pool size in `3..=20`.
pub fn check_submodularity(
    family: ObjectiveFamily,
    trials: usize,
    seed: u64,
) -> Result<PropertyReport, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let regime = regime_for_trial(trial);
        let n = rng.gen_range(3..=20);
        let instance = random_instance(family, n, regime, &mut rng);
        let objective = instance.objective();

        let (chain, x) = random_chain_with_outsider(n, &mut rng);
        let b_len = chain.len();
        let a_len = rng.gen_range(0..=b_len);
        let gain_small = marginal_by_definition(&objective, &chain[..a_len], x, n)?;
        let gain_large = marginal_by_definition(&objective, &chain[..b_len], x, n)?;

        let excess = gain_large - gain_small;
        if excess > PROOF_CHECK_TOLERANCE {
            violations += 1;
        }
        worst = worst.max(excess.max(0.0));
    }
    Ok(PropertyReport {
        check: PropertyCheck::Submodularity,
        family,
        trials,
        violations,
        worst_violation: worst,
        seed,
        tolerance: PROOF_CHECK_TOLERANCE,
    })
}

/// Samples random `S ⊆ T` pairs and checks `F(S) ≤ F(T)` within the
/// tolerance.
pub fn check_monotonicity(
    family: ObjectiveFamily,
    trials: usize,
    seed: u64,
) -> Result<PropertyReport, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let regime = regime_for_trial(trial);
        let n = rng.gen_range(3..=20);
        let instance = random_instance(family, n, regime, &mut rng);
        let objective = instance.objective();

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let t_len = rng.gen_range(0..=n);
        let s_len = rng.gen_range(0..=t_len);
        let f_small = objective.eval(&Subset::new(order[..s_len].to_vec(), n)?)?;
        let f_large = objective.eval(&Subset::new(order[..t_len].to_vec(), n)?)?;

        let excess = f_small - f_large;
        if excess > PROOF_CHECK_TOLERANCE {
            violations += 1;
        }
        worst = worst.max(excess.max(0.0));
    }
    Ok(PropertyReport {
        check: PropertyCheck::Monotonicity,
        family,
        trials,
        violations,
        worst_violation: worst,
        seed,
        tolerance: PROOF_CHECK_TOLERANCE,
    })
}

fn regime_for_trial(trial: usize) -> SimRegime {
    if trial.is_multiple_of(2) {
        SimRegime::UnitVectorCos
    } else {
        SimRegime::ArbitrarySymmetric
    }
}

/// Random prefix-chain `perm[..len]` plus an element outside it.
fn random_chain_with_outsider(n: usize, rng: &mut impl Rng) -> (Vec<usize>, usize) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let b_len = rng.gen_range(0..n); // leaves order[b_len] outside B
    let x = order[b_len];
    order.truncate(b_len);
    (order, x)
}

/// `F(S ∪ {x}) - F(S)` via two direct evaluations.
fn marginal_by_definition(
    objective: &Objective,
    base: &[usize],
    x: usize,
    n: usize,
) -> Result<f64, ObjectiveError> {
    let without = Subset::new(base.to_vec(), n)?;
    let mut with_x = base.to_vec();
    with_x.push(x);
    let with_x = Subset::new(with_x, n)?;
    Ok(objective.eval(&with_x)? - objective.eval(&without)?)
}

fn n_choose_k(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if result > BRUTE_FORCE_LIMIT {
            return u128::MAX;
        }
    }
    result
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    InstanceTooLarge {
        n: usize,
        k: usize,
    },
    BudgetExceedsPool {
        k: usize,
        n: usize,
    },
    Objective(ObjectiveError),
    /// Placeholder for string-carrying errors surfaced by the CLI.
    Other(String),
}

impl From<ObjectiveError> for OracleError {
    fn from(err: ObjectiveError) -> Self {
        OracleError::Objective(err)
    }
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::InstanceTooLarge { n, k } => {
                write!(f, "C({n}, {k}) subsets exceed the brute-force limit")
            }
            OracleError::BudgetExceedsPool { k, n } => {
                write!(f, "budget {k} exceeds pool size {n}")
            }
            OracleError::Objective(err) => err.fmt(f),
            OracleError::Other(msg) => f.write_str(msg),
        }
    }
}

impl core::error::Error for OracleError {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::{topk_select, Algorithm, ObjectiveLabel, SelectionConfig};
    use alloc::vec;

    fn sim3() -> SimilarityMatrix {
        SimilarityMatrix::from_entries(3, vec![1.0, 0.8, 0.2, 0.8, 1.0, 0.4, 0.2, 0.4, 1.0])
            .unwrap()
    }

    #[test]
    fn brute_force_on_the_worked_example() {
        let sim = sim3();
        let (subset, value) = brute_force_optimum(&Objective::Rep(&sim), 2).unwrap();
        // {0,2} and {1,2} both score 2.8; lexicographically smallest wins.
        assert!((value - 2.8).abs() < 1e-12);
        assert_eq!(subset.positions(), &[0, 2]);
    }

    #[test]
    fn brute_force_full_set() {
        let sim = sim3();
        let (subset, value) = brute_force_optimum(&Objective::Rep(&sim), 3).unwrap();
        assert_eq!(subset.positions(), &[0, 1, 2]);
        assert_eq!(value, 3.0);
    }

    #[test]
    fn brute_force_guards() {
        let sim = sim3();
        assert_eq!(
            brute_force_optimum(&Objective::Rep(&sim), 4),
            Err(OracleError::BudgetExceedsPool { k: 4, n: 3 })
        );
        // C(60, 30) is astronomically past the limit.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let big = random_similarity(60, SimRegime::ArbitrarySymmetric, &mut rng);
        assert_eq!(
            brute_force_optimum(&Objective::Rep(&big), 30),
            Err(OracleError::InstanceTooLarge { n: 60, k: 30 })
        );
    }

    #[test]
    fn brute_force_matches_topk_on_lc() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(3..=10);
            let conf = random_confidence(n, &mut rng);
            let k = rng.gen_range(1..=n);
            let (_, brute_value) = brute_force_optimum(&Objective::Lc(&conf), k).unwrap();
            let config = SelectionConfig {
                k,
                alpha: 0.7,
                lambda: 0.5,
                algorithm: Algorithm::TopK,
                objective: ObjectiveLabel::Lc,
            };
            let topk = topk_select(&conf, &config).unwrap();
            assert!((brute_value - topk.final_value).abs() < PROOF_CHECK_TOLERANCE);
        }
    }

    #[test]
    fn property_checks_pass_on_valid_inputs() {
        for family in ObjectiveFamily::ALL {
            let sub = check_submodularity(family, 200, 42).unwrap();
            assert_eq!(sub.violations, 0, "{family:?}: {sub:?}");
            let mono = check_monotonicity(family, 200, 43).unwrap();
            assert_eq!(mono.violations, 0, "{family:?}: {mono:?}");
        }
    }

    #[test]
    fn monotonicity_survives_zero_weights() {
        // w(j) = 0 is allowed; only w >= 0 matters.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sim = random_similarity(6, SimRegime::UnitVectorCos, &mut rng);
        let conf = ConfidenceVector::new(vec![1.0, 1.0, 0.0, 0.5, 1.0, 0.2]).unwrap();
        let w = compute_weights(&conf, 1.0).unwrap(); // zeros where c̃ = 1
        let objective = Objective::Wrep(&sim, &w);
        let small = Subset::new(vec![1], 6).unwrap();
        let large = Subset::new(vec![1, 3, 4], 6).unwrap();
        assert!(objective.eval(&small).unwrap() <= objective.eval(&large).unwrap() + 1e-15);
    }

    /// Facility location over raw (possibly negative) entries, with the
    /// convention F(∅) = 0. Only used to demonstrate that the sim ≥ 0
    /// precondition matters; the production matrix type refuses negative
    /// entries outright.
    fn raw_facility_location(entries: &[f64], n: usize, subset: &[usize]) -> f64 {
        if subset.is_empty() {
            return 0.0;
        }
        (0..n)
            .map(|j| {
                subset
                    .iter()
                    .map(|&i| entries[i * n + j])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum()
    }

    #[test]
    fn negative_entries_break_submodularity() {
        // Search random symmetric 3x3 matrices with entries in [-1, 1] for a
        // diminishing-returns violation over A = ∅.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 3;
        let mut found = false;
        'search: for _ in 0..10_000 {
            let mut entries = vec![0.0f64; n * n];
            for i in 0..n {
                entries[i * n + i] = 1.0;
                for j in (i + 1)..n {
                    let v = rng.gen::<f64>() * 2.0 - 1.0;
                    entries[i * n + j] = v;
                    entries[j * n + i] = v;
                }
            }
            for x in 0..n {
                for b in 0..n {
                    if b == x {
                        continue;
                    }
                    let gain_empty = raw_facility_location(&entries, n, &[x]);
                    let gain_b = raw_facility_location(&entries, n, &[b, x])
                        - raw_facility_location(&entries, n, &[b]);
                    if gain_empty < gain_b - PROOF_CHECK_TOLERANCE {
                        found = true;
                        break 'search;
                    }
                }
            }
        }
        assert!(
            found,
            "expected a diminishing-returns violation with negative entries"
        );
    }
}
