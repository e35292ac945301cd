//! Deterministic synthetic replica of a prompt-optimization loop.
//!
//! Real prompt optimization scores candidate prompts with an LLM on a fixed
//! evaluation subset; that feedback is the only signal the optimizer sees.
//! This harness replaces both models with a closed-form stand-in so that the
//! effect of *subset choice* can be measured at desk scale with zero
//! evaluation noise:
//!
//! - an example `j` is a feature vector `z_j` with a scalar difficulty `d_j`,
//!   drawn from a clustered generator so the pool has regions to cover;
//! - a prompt is a parameter vector `θ`, and its expected accuracy on a set
//!   is the mean of `σ(θ·z_j - d_j)` (analytic, no sampling);
//! - the optimizer is seeded Gaussian hill-climbing on the subset score.
//!
//! Confidence for the lc/wrep selectors is `σ(θ₀·z_j - d_j)` under the zero
//! probe prompt `θ₀`, run through the production normalize/weights pipeline;
//! similarity for rep/wrep reuses the production dense-similarity path over
//! the `z_j`. Everything is a pure function of the seeds involved.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::confidence::{
    compute_weights, normalize, ConfidenceError, ConfidenceSource, RawConfidence,
};
use crate::corpus::EmbeddingTable;
use crate::math;
use crate::objectives::{Objective, Subset};
use crate::selection::{
    lazy_greedy_select, topk_select, Algorithm, ObjectiveLabel, SelectError, SelectionConfig,
};
use crate::similarity::{dense_similarity, SimilarityError};

/// Spread of cluster centers in feature space.
const CENTER_SCALE: f64 = 1.5;
/// Within-cluster feature noise.
const FEATURE_NOISE: f64 = 0.4;
/// Spread of per-cluster difficulty bias.
const DIFFICULTY_BIAS_SCALE: f64 = 1.0;
/// Within-cluster difficulty noise.
const DIFFICULTY_NOISE: f64 = 0.5;
/// Standard deviation of hill-climbing proposal perturbations.
const PROPOSAL_SIGMA: f64 = 0.25;

/// A synthetic example pool: per-example features and difficulties, generated
/// deterministically from a seed.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    features: Vec<f64>, // pool_size × dim, row-major
    difficulty: Vec<f64>,
    dim: usize,
    seed: u64,
}

impl SyntheticTask {
    /// Draws a clustered pool: `max(2, dim)` Gaussian cluster centers, each
    /// example a noisy copy of its (randomly assigned) center, with a
    /// per-cluster difficulty bias plus per-example noise.
    pub fn generate(pool_size: usize, dim: usize, seed: u64) -> Result<Self, HarnessError> {
        if pool_size == 0 || dim == 0 {
            return Err(HarnessError::InvalidTaskShape { pool_size, dim });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clusters = dim.max(2);
        let mut centers = Vec::with_capacity(clusters * dim);
        for _ in 0..clusters * dim {
            centers.push(CENTER_SCALE * rng.sample::<f64, _>(StandardNormal));
        }
        let mut bias = Vec::with_capacity(clusters);
        for _ in 0..clusters {
            bias.push(DIFFICULTY_BIAS_SCALE * rng.sample::<f64, _>(StandardNormal));
        }

        let mut features = Vec::with_capacity(pool_size * dim);
        let mut difficulty = Vec::with_capacity(pool_size);
        for _ in 0..pool_size {
            let c = rng.gen_range(0..clusters);
            for coord in 0..dim {
                let noise: f64 = rng.sample(StandardNormal);
                features.push(centers[c * dim + coord] + FEATURE_NOISE * noise);
            }
            let noise: f64 = rng.sample(StandardNormal);
            difficulty.push(bias[c] + DIFFICULTY_NOISE * noise);
        }
        Ok(SyntheticTask {
            features,
            difficulty,
            dim,
            seed,
        })
    }

    pub fn pool_size(&self) -> usize {
        self.difficulty.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn feature(&self, j: usize) -> &[f64] {
        &self.features[j * self.dim..(j + 1) * self.dim]
    }

    pub fn difficulty(&self, j: usize) -> f64 {
        self.difficulty[j]
    }

    /// The features as an embedding table, feeding the production similarity
    /// path.
    pub fn embedding_table(&self) -> EmbeddingTable {
        let rows = (0..self.pool_size())
            .map(|j| (alloc::format!("syn-{j}"), self.feature(j).to_vec()))
            .collect();
        EmbeddingTable::from_rows(rows).expect("synthetic features are finite")
    }

    /// Raw probe confidence `σ(θ₀·z_j - d_j)` under the zero prompt `θ₀`,
    /// i.e. `σ(-d_j)`: low where the pool is hard.
    pub fn probe_confidence(&self) -> RawConfidence {
        let values = self
            .difficulty
            .iter()
            .map(|&d| math::logistic(-d))
            .collect();
        RawConfidence::new(values, ConfidenceSource::Verbal)
            .expect("logistic output lies in (0, 1)")
    }

    fn full_subset(&self) -> Subset {
        Subset::new((0..self.pool_size()).collect(), self.pool_size())
            .expect("identity subset is valid")
    }
}

/// A candidate prompt: the parameter vector the optimizer mutates.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPrompt {
    params: Vec<f64>,
}

impl SyntheticPrompt {
    pub fn zeros(dim: usize) -> Self {
        SyntheticPrompt {
            params: alloc::vec![0.0; dim],
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }
}

/// Mean of `σ(θ·z_j - d_j)` over the subset. Deterministic; no sampling.
pub fn expected_accuracy(
    task: &SyntheticTask,
    prompt: &SyntheticPrompt,
    subset: &Subset,
) -> Result<f64, HarnessError> {
    if subset.is_empty() {
        return Err(HarnessError::EmptySubset);
    }
    let n = task.pool_size();
    if let Some(&last) = subset.positions().last() {
        if last >= n {
            return Err(HarnessError::IndexOutOfRange { position: last, n });
        }
    }
    let mut total = 0.0;
    for &j in subset.positions() {
        let margin = dot(prompt.params(), task.feature(j)) - task.difficulty(j);
        total += math::logistic(margin);
    }
    Ok(total / subset.len() as f64)
}

/// One recorded optimization step, taken after the step's accept decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    /// Score of the retained prompt on the evaluation subset (the only
    /// feedback the optimizer sees).
    pub subset_score: f64,
    /// Score of the retained prompt on the full pool (reporting only).
    pub full_pool_score: f64,
}

/// Seeded Gaussian hill-climbing around the best prompt so far.
///
/// Each step proposes `candidates_per_step` perturbations of the incumbent,
/// scores them on the subset, and keeps the incumbent unless a candidate
/// strictly improves on it — so the subset score never decreases along the
/// trajectory.
pub fn run_optimization(
    task: &SyntheticTask,
    subset: &Subset,
    steps: usize,
    candidates_per_step: usize,
    seed: u64,
) -> Result<(SyntheticPrompt, Vec<TraceStep>), HarnessError> {
    if steps == 0 {
        return Err(HarnessError::InvalidSteps);
    }
    if candidates_per_step == 0 {
        return Err(HarnessError::InvalidCandidates);
    }
    let full = task.full_subset();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = SyntheticPrompt::zeros(task.dim());
    let mut best_score = expected_accuracy(task, &best, subset)?;

    let mut trace = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut step_best: Option<(f64, SyntheticPrompt)> = None;
        for _ in 0..candidates_per_step {
            let params = best
                .params()
                .iter()
                .map(|&p| p + PROPOSAL_SIGMA * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let candidate = SyntheticPrompt { params };
            let score = expected_accuracy(task, &candidate, subset)?;
            let improves = match &step_best {
                Some((s, _)) => score > *s,
                None => true,
            };
            if improves {
                step_best = Some((score, candidate));
            }
        }
        if let Some((score, candidate)) = step_best {
            if score > best_score {
                best_score = score;
                best = candidate;
            }
        }
        trace.push(TraceStep {
            subset_score: best_score,
            full_pool_score: expected_accuracy(task, &best, &full)?,
        });
    }
    Ok((best, trace))
}

/// Subset-construction strategies compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    /// Fresh uniform sample per repetition.
    Random,
    /// Greedy facility location over dense feature similarity.
    Rep,
    /// Top-k by probe uncertainty.
    Lc,
    /// Greedy confidence-weighted facility location.
    Wrep,
    /// The whole pool; upper reference, ignores the budget.
    FullPool,
}

impl Selector {
    pub const DEFAULT: [Selector; 5] = [
        Selector::Random,
        Selector::Rep,
        Selector::Lc,
        Selector::Wrep,
        Selector::FullPool,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Selector::Random => "random",
            Selector::Rep => "rep",
            Selector::Lc => "lc",
            Selector::Wrep => "wrep",
            Selector::FullPool => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Selector> {
        match s {
            "random" => Some(Selector::Random),
            "rep" => Some(Selector::Rep),
            "lc" => Some(Selector::Lc),
            "wrep" => Some(Selector::Wrep),
            "full" => Some(Selector::FullPool),
            _ => None,
        }
    }
}

/// Parameters of one selector comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessConfig {
    pub budget: usize,
    pub repetitions: usize,
    pub steps: usize,
    pub candidates_per_step: usize,
    pub master_seed: u64,
    /// Difficulty weight for the wrep selector.
    pub lambda: f64,
}

/// Aggregated outcome for one selector.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorSummary {
    pub selector: Selector,
    /// Mean/stdev over repetitions of the final prompt's full-pool accuracy.
    pub mean_full_accuracy: f64,
    pub stdev_full_accuracy: f64,
    /// Mean of the final subset score; the gap to full accuracy shows how far
    /// a selector lets the optimizer overfit its subset.
    pub mean_subset_accuracy: f64,
}

/// Comparison of selectors on one task, with the configuration echoed.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<SelectorSummary>,
    pub pool_size: usize,
    pub dim: usize,
    pub task_seed: u64,
    pub budget: usize,
    pub repetitions: usize,
    pub steps: usize,
    pub candidates_per_step: usize,
    pub master_seed: u64,
    pub lambda: f64,
}

/// Runs every selector through `repetitions` optimization runs and reports
/// the mean/stdev of final full-pool accuracy.
///
/// Repetition `r` uses the same optimizer seed for every selector (paired
/// comparison); deterministic selectors keep one fixed subset across
/// repetitions while the random selector redraws per repetition, so its
/// column measures the strategy rather than a single draw.
pub fn compare_selectors(
    task: &SyntheticTask,
    selectors: &[Selector],
    config: &HarnessConfig,
) -> Result<ComparisonTable, HarnessError> {
    let n = task.pool_size();
    if config.budget == 0 || config.budget > n {
        return Err(HarnessError::BudgetExceedsPool {
            budget: config.budget,
            n,
        });
    }
    if config.repetitions == 0 {
        return Err(HarnessError::InvalidRepetitions);
    }

    let emb = task.embedding_table();
    let sim = dense_similarity(&emb)?;
    let conf = normalize(&task.probe_confidence());
    let weights = compute_weights(&conf, config.lambda)?;

    let fixed_subset = |selector: Selector| -> Result<Option<Subset>, HarnessError> {
        let sel_config = |objective: ObjectiveLabel, algorithm: Algorithm| SelectionConfig {
            k: config.budget,
            alpha: 1.0,
            lambda: config.lambda,
            algorithm,
            objective,
        };
        Ok(match selector {
            Selector::Random => None,
            Selector::Rep => {
                let result = lazy_greedy_select(
                    &Objective::Rep(&sim),
                    &sel_config(ObjectiveLabel::Rep, Algorithm::Lazy),
                )?;
                Some(Subset::new(result.chosen, n)?)
            }
            Selector::Lc => {
                let result = topk_select(&conf, &sel_config(ObjectiveLabel::Lc, Algorithm::TopK))?;
                Some(Subset::new(result.chosen, n)?)
            }
            Selector::Wrep => {
                let result = lazy_greedy_select(
                    &Objective::Wrep(&sim, &weights),
                    &sel_config(ObjectiveLabel::Wrep, Algorithm::Lazy),
                )?;
                Some(Subset::new(result.chosen, n)?)
            }
            Selector::FullPool => Some(task.full_subset()),
        })
    };

    let mut rows = Vec::with_capacity(selectors.len());
    for &selector in selectors {
        let fixed = fixed_subset(selector)?;
        let mut finals_full = Vec::with_capacity(config.repetitions);
        let mut finals_subset = Vec::with_capacity(config.repetitions);
        for rep in 0..config.repetitions {
            let subset = match &fixed {
                Some(s) => s.clone(),
                None => random_subset(
                    n,
                    config.budget,
                    split_seed(config.master_seed, SUBSET_STREAM, rep as u64),
                )?,
            };
            let opt_seed = split_seed(config.master_seed, OPTIMIZER_STREAM, rep as u64);
            let (_, trace) = run_optimization(
                task,
                &subset,
                config.steps,
                config.candidates_per_step,
                opt_seed,
            )?;
            let last = trace.last().expect("steps >= 1");
            finals_full.push(last.full_pool_score);
            finals_subset.push(last.subset_score);
        }
        rows.push(SelectorSummary {
            selector,
            mean_full_accuracy: mean(&finals_full),
            stdev_full_accuracy: sample_stdev(&finals_full),
            mean_subset_accuracy: mean(&finals_subset),
        });
    }

    Ok(ComparisonTable {
        rows,
        pool_size: n,
        dim: task.dim(),
        task_seed: task.seed(),
        budget: config.budget,
        repetitions: config.repetitions,
        steps: config.steps,
        candidates_per_step: config.candidates_per_step,
        master_seed: config.master_seed,
        lambda: config.lambda,
    })
}

const OPTIMIZER_STREAM: u64 = 1;
const SUBSET_STREAM: u64 = 2;

/// Decorrelates per-repetition seeds from the master seed.
pub fn split_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master.wrapping_add(splitmix64(stream))).wrapping_add(index))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn random_subset(n: usize, k: usize, seed: u64) -> Result<Subset, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, n, k).into_vec();
    Ok(Subset::new(picks, n)?)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_stdev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|&v| (v - m) * (v - m)).sum();
    math::sqrt(ss / (values.len() - 1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum HarnessError {
    EmptySubset,
    InvalidSteps,
    InvalidCandidates,
    InvalidRepetitions,
    InvalidTaskShape { pool_size: usize, dim: usize },
    BudgetExceedsPool { budget: usize, n: usize },
    IndexOutOfRange { position: usize, n: usize },
    Selection(String),
}

impl From<SelectError> for HarnessError {
    fn from(err: SelectError) -> Self {
        HarnessError::Selection(alloc::format!("{err}"))
    }
}

impl From<crate::objectives::ObjectiveError> for HarnessError {
    fn from(err: crate::objectives::ObjectiveError) -> Self {
        HarnessError::Selection(alloc::format!("{err}"))
    }
}

impl From<SimilarityError> for HarnessError {
    fn from(err: SimilarityError) -> Self {
        HarnessError::Selection(alloc::format!("{err}"))
    }
}

impl From<ConfidenceError> for HarnessError {
    fn from(err: ConfidenceError) -> Self {
        HarnessError::Selection(alloc::format!("{err}"))
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::EmptySubset => f.write_str("evaluation subset is empty"),
            HarnessError::InvalidSteps => f.write_str("steps must be at least 1"),
            HarnessError::InvalidCandidates => {
                f.write_str("candidates per step must be at least 1")
            }
            HarnessError::InvalidRepetitions => f.write_str("repetitions must be at least 1"),
            HarnessError::InvalidTaskShape { pool_size, dim } => {
                write!(
                    f,
                    "task needs pool_size >= 1 and dim >= 1, got {pool_size}x{dim}"
                )
            }
            HarnessError::BudgetExceedsPool { budget, n } => {
                write!(f, "budget {budget} invalid for pool of size {n}")
            }
            HarnessError::IndexOutOfRange { position, n } => {
                write!(f, "position {position} out of range for pool of size {n}")
            }
            HarnessError::Selection(msg) => f.write_str(msg),
        }
    }
}

impl core::error::Error for HarnessError {}
