//! Question–question similarity matrices.
//!
//! Two components are supported: a dense matrix from embedding vectors with
//! cosine similarity rescaled to `(1 + cos)/2`, and a lexical matrix from
//! TF-IDF vectors with a square-root transform. The two are combined entrywise
//! as `α·dense + (1-α)·lexical`.
//!
//! Every entry is a pure function of its `(i, j)` pair, so construction can be
//! parallelized over rows (the `parallel` feature) without affecting a single
//! bit of the output.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{EmbeddingTable, Pool};
use crate::math;

/// Symmetric n×n matrix of similarities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds a matrix from row-major entries, validating the invariants:
    /// `entries.len() == n*n`, all values finite and in `[0, 1]`, and
    /// symmetry within `1e-12`.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self, SimilarityError> {
        if entries.len() != n * n {
            return Err(SimilarityError::SizeMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        for (idx, &v) in entries.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(SimilarityError::EntryOutOfRange {
                    row: idx / n,
                    col: idx % n,
                    value: v,
                });
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let a = entries[i * n + j];
                let b = entries[j * n + i];
                if (a - b).abs() > 1e-12 {
                    return Err(SimilarityError::Asymmetric { row: i, col: j });
                }
            }
        }
        Ok(SimilarityMatrix { n, entries })
    }

    /// Internal constructor for matrices that are symmetric and in-range by
    /// construction.
    pub(crate) fn from_entries_unchecked(n: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), n * n);
        SimilarityMatrix { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Dense similarity `(1 + cos(v_i, v_j)) / 2` over embedding vectors.
///
/// The diagonal is exactly 1 and the matrix is exactly symmetric: each
/// off-diagonal entry is the same sequence of float operations regardless of
/// which side of the diagonal it sits on.
pub fn dense_similarity(emb: &EmbeddingTable) -> Result<SimilarityMatrix, SimilarityError> {
    let n = emb.len();
    let mut norms = Vec::with_capacity(n);
    for i in 0..n {
        let norm = math::sqrt(dot(emb.vector(i), emb.vector(i)));
        if norm == 0.0 {
            return Err(SimilarityError::ZeroNormVector(emb.id(i).to_string()));
        }
        norms.push(norm);
    }

    let mut entries = vec![0.0f64; n * n];
    let fill_row = |i: usize, row: &mut [f64]| {
        let vi = emb.vector(i);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = if i == j {
                1.0
            } else {
                let cos = (dot(vi, emb.vector(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0);
                (1.0 + cos) / 2.0
            };
        }
    };
    for_each_row(&mut entries, n, fill_row);
    Ok(SimilarityMatrix::from_entries_unchecked(n, entries))
}

/// Lexical similarity: square root of the cosine between TF-IDF vectors.
///
/// Tokenizer: lowercase the text, split on any non-alphanumeric character,
/// drop empty tokens. Term frequency is the raw count and
/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`. Document vectors are
/// L2-normalized, so with non-negative weights the cosine already lands in
/// `[0, 1]`; it is clamped there against rounding before the square root.
pub fn tfidf_similarity(pool: &Pool) -> Result<SimilarityMatrix, SimilarityError> {
    let n = pool.len();
    let mut docs: Vec<BTreeMap<String, f64>> = Vec::with_capacity(n);
    let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
    for ex in pool.examples() {
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        for token in tokenize(&ex.text) {
            *counts.entry(token).or_insert(0.0) += 1.0;
        }
        if counts.is_empty() {
            return Err(SimilarityError::EmptyTokenization(ex.id.clone()));
        }
        for token in counts.keys() {
            *doc_freq.entry(token.clone()).or_insert(0) += 1;
        }
        docs.push(counts);
    }

    // Weight by idf and L2-normalize each document vector, iterating tokens
    // in sorted order so accumulation is reproducible.
    for doc in &mut docs {
        let mut sq_sum = 0.0;
        for (token, weight) in doc.iter_mut() {
            let df = doc_freq[token] as f64;
            let idf = math::ln((1.0 + n as f64) / (1.0 + df)) + 1.0;
            *weight *= idf;
            sq_sum += *weight * *weight;
        }
        let norm = math::sqrt(sq_sum);
        for weight in doc.values_mut() {
            *weight /= norm;
        }
    }

    let mut entries = vec![0.0f64; n * n];
    let fill_row = |i: usize, row: &mut [f64]| {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = if i == j {
                1.0
            } else {
                math::sqrt(sparse_dot(&docs[i], &docs[j]).clamp(0.0, 1.0))
            };
        }
    };
    for_each_row(&mut entries, n, fill_row);
    Ok(SimilarityMatrix::from_entries_unchecked(n, entries))
}

/// Entrywise convex combination `α·dense + (1-α)·lexical`.
///
/// Each entry is clamped to the interval spanned by its two inputs, which
/// keeps the endpoint cases `α ∈ {0, 1}` exact and rules out rounding ever
/// escaping `[min, max]`.
pub fn mix(
    dense: &SimilarityMatrix,
    lexical: &SimilarityMatrix,
    alpha: f64,
) -> Result<SimilarityMatrix, SimilarityError> {
    if dense.n() != lexical.n() {
        return Err(SimilarityError::SizeMismatch {
            expected: dense.n(),
            got: lexical.n(),
        });
    }
    if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
        return Err(SimilarityError::AlphaOutOfRange(alpha));
    }
    let n = dense.n();
    let beta = 1.0 - alpha;
    let entries = dense
        .entries()
        .iter()
        .zip(lexical.entries().iter())
        .map(|(&d, &l)| (alpha * d + beta * l).clamp(d.min(l), d.max(l)))
        .collect();
    Ok(SimilarityMatrix::from_entries_unchecked(n, entries))
}

/// Lowercase, split on non-alphanumeric, drop empties.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sparse_dot(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    // Iterate the smaller map; token order is sorted either way, so the sum
    // is the same bit pattern no matter which of (i,j)/(j,i) is asked for.
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut sum = 0.0;
    for (token, &wa) in small {
        if let Some(&wb) = large.get(token) {
            sum += wa * wb;
        }
    }
    sum
}

#[cfg(feature = "parallel")]
fn for_each_row(entries: &mut [f64], n: usize, fill: impl Fn(usize, &mut [f64]) + Sync) {
    use rayon::prelude::*;
    entries
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| fill(i, row));
}

#[cfg(not(feature = "parallel"))]
fn for_each_row(entries: &mut [f64], n: usize, fill: impl Fn(usize, &mut [f64]) + Sync) {
    for (i, row) in entries.chunks_mut(n).enumerate() {
        fill(i, row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimilarityError {
    ZeroNormVector(String),
    EmptyTokenization(String),
    SizeMismatch { expected: usize, got: usize },
    AlphaOutOfRange(f64),
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    Asymmetric { row: usize, col: usize },
}

impl fmt::Display for SimilarityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimilarityError::ZeroNormVector(id) => {
                write!(f, "embedding for {id:?} has zero norm; cosine is undefined")
            }
            SimilarityError::EmptyTokenization(id) => {
                write!(f, "text of {id:?} produced no tokens")
            }
            SimilarityError::SizeMismatch { expected, got } => {
                write!(f, "matrix size mismatch: expected {expected}, got {got}")
            }
            SimilarityError::AlphaOutOfRange(a) => {
                write!(f, "mixing weight alpha must lie in [0, 1], got {a}")
            }
            SimilarityError::EntryOutOfRange { row, col, value } => {
                write!(f, "entry ({row}, {col}) = {value} outside [0, 1]")
            }
            SimilarityError::Asymmetric { row, col } => {
                write!(
                    f,
                    "entries ({row}, {col}) and ({col}, {row}) differ beyond 1e-12"
                )
            }
        }
    }
}

impl core::error::Error for SimilarityError {}
