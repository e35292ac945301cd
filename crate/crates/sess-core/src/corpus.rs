//! Candidate pool model: examples, the id → position index, and per-example
//! embedding vectors.
//!
//! Positions `0..len()` are dense and stable for the lifetime of a pool, and
//! every matrix and vector elsewhere in the crate is aligned to them. File
//! ingestion lives in the companion `sess` crate; the constructors here only
//! enforce the structural invariants.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// A single candidate evaluation example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    /// Unique identifier within a pool.
    pub id: String,
    /// Question / problem statement. Never empty.
    pub text: String,
    /// Ground-truth answer, required for likelihood-based confidence.
    pub answer: Option<String>,
    /// Free-form labels.
    pub tags: Vec<String>,
}

impl Example {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Example {
            id: id.into(),
            text: text.into(),
            answer: None,
            tags: Vec::new(),
        }
    }
}

/// Ordered, immutable pool of candidate examples.
#[derive(Debug, Clone)]
pub struct Pool {
    examples: Vec<Example>,
    index: BTreeMap<String, usize>,
}

impl Pool {
    /// Builds a pool from examples in their given order.
    ///
    /// Rejects empty pools, duplicate ids, and empty texts.
    pub fn new(examples: Vec<Example>) -> Result<Self, CorpusError> {
        if examples.is_empty() {
            return Err(CorpusError::EmptyPool);
        }
        let mut index = BTreeMap::new();
        for (pos, ex) in examples.iter().enumerate() {
            if ex.text.is_empty() {
                return Err(CorpusError::EmptyText(ex.id.clone()));
            }
            if index.insert(ex.id.clone(), pos).is_some() {
                return Err(CorpusError::DuplicateId(ex.id.clone()));
            }
        }
        Ok(Pool { examples, index })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    /// Always false: a `Pool` holds at least one example by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, position: usize) -> Option<&Example> {
        self.examples.get(position)
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    /// Position of `id` in the pool order, if present.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|ex| ex.id.as_str())
    }
}

/// Dense embedding vectors aligned to pool positions.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    /// Builds a table from `(id, vector)` rows already in pool order.
    ///
    /// The dimension is inferred from the first row; every row must match it
    /// and contain only finite values.
    pub fn from_rows(rows: Vec<(String, Vec<f64>)>) -> Result<Self, CorpusError> {
        let dim = match rows.first() {
            Some((_, v)) => v.len(),
            None => return Err(CorpusError::EmptyPool),
        };
        if dim == 0 {
            return Err(CorpusError::DimMismatch {
                expected: 1,
                got: 0,
            });
        }
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (id, vector) in rows {
            if vector.len() != dim {
                return Err(CorpusError::DimMismatch {
                    expected: dim,
                    got: vector.len(),
                });
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(CorpusError::NonFiniteValue(id));
            }
            ids.push(id);
            data.extend_from_slice(&vector);
        }
        Ok(EmbeddingTable { dim, ids, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, position: usize) -> &str {
        &self.ids[position]
    }

    pub fn vector(&self, position: usize) -> &[f64] {
        &self.data[position * self.dim..(position + 1) * self.dim]
    }
}

/// Violations of pool / embedding invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusError {
    DuplicateId(String),
    EmptyPool,
    EmptyText(String),
    DimMismatch { expected: usize, got: usize },
    NonFiniteValue(String),
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::DuplicateId(id) => write!(f, "duplicate example id {id:?}"),
            CorpusError::EmptyPool => f.write_str("pool must contain at least one example"),
            CorpusError::EmptyText(id) => write!(f, "example {id:?} has an empty text"),
            CorpusError::DimMismatch { expected, got } => {
                write!(
                    f,
                    "embedding dimension mismatch: expected {expected}, got {got}"
                )
            }
            CorpusError::NonFiniteValue(id) => {
                write!(f, "embedding for {id:?} contains a non-finite value")
            }
        }
    }
}

impl core::error::Error for CorpusError {}
