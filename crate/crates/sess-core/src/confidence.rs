//! Scorer-confidence ingestion and importance weights.
//!
//! Raw confidence comes from one of two signals: the maximum probability a
//! model states for its guesses in a verbalized reply, or the ground-truth
//! answer's log-likelihood normalized by answer length. Raw scores are
//! min-max normalized pool-wide to `c̃(j) ∈ [0, 1]`, from which importance
//! weights `w(j) = (1 - λ) + λ·(1 - c̃(j))` are derived: `λ = 0` gives uniform
//! weights, larger `λ` shifts weight toward low-confidence examples.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::Pool;

/// Where a raw confidence score came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfidenceSource {
    /// Stated probability parsed from a guesses-with-probabilities reply.
    /// Values lie in `[0, 1]`.
    Verbal,
    /// Length-normalized answer log-likelihood. Any finite value.
    Loglik,
}

impl ConfidenceSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ConfidenceSource::Verbal => "verbal",
            ConfidenceSource::Loglik => "loglik",
        }
    }
}

/// Raw per-example confidence scores `c(j)`, aligned to pool positions.
#[derive(Debug, Clone, PartialEq)]
pub struct RawConfidence {
    values: Vec<f64>,
    source: ConfidenceSource,
}

impl RawConfidence {
    /// Validates values against the source: finite always, and within
    /// `[0, 1]` for verbal scores.
    pub fn new(values: Vec<f64>, source: ConfidenceSource) -> Result<Self, ConfidenceError> {
        for (pos, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(ConfidenceError::NonFiniteValue { position: pos });
            }
            if source == ConfidenceSource::Verbal && !(0.0..=1.0).contains(&v) {
                return Err(ConfidenceError::VerbalOutOfRange {
                    position: pos,
                    value: v,
                });
            }
        }
        Ok(RawConfidence { values, source })
    }

    /// Assembles a pool-aligned vector from `(id, score)` entries in any
    /// order, requiring exactly one entry per pool example.
    pub fn from_entries(
        pool: &Pool,
        entries: &[(String, f64)],
        source: ConfidenceSource,
    ) -> Result<Self, ConfidenceError> {
        let mut values = alloc::vec![f64::NAN; pool.len()];
        let mut seen = BTreeSet::new();
        for (id, score) in entries {
            let pos = pool
                .position(id)
                .ok_or_else(|| ConfidenceError::UnknownId(id.clone()))?;
            if !seen.insert(pos) {
                return Err(ConfidenceError::DuplicateEntry(id.clone()));
            }
            values[pos] = *score;
        }
        if seen.len() != pool.len() {
            let missing = pool
                .ids()
                .enumerate()
                .filter(|(pos, _)| !seen.contains(pos))
                .map(|(_, id)| String::from(id))
                .collect();
            return Err(ConfidenceError::IncompleteCoverage(missing));
        }
        RawConfidence::new(values, source)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> ConfidenceSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Normalized confidences `c̃(j) ∈ [0, 1]`, aligned to pool positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector {
    values: Vec<f64>,
}

impl ConfidenceVector {
    /// Accepts values already in `[0, 1]`.
    pub fn new(values: Vec<f64>) -> Result<Self, ConfidenceError> {
        for (pos, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(ConfidenceError::VerbalOutOfRange {
                    position: pos,
                    value: v,
                });
            }
        }
        Ok(ConfidenceVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, position: usize) -> f64 {
        self.values[position]
    }

    /// Per-example uncertainty `1 - c̃(j)`.
    #[inline]
    pub fn uncertainty(&self, position: usize) -> f64 {
        1.0 - self.values[position]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Importance weights `w(j)`, together with the λ that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    lambda: f64,
}

impl WeightVector {
    /// Direct constructor for tests; production weights come from
    /// [`compute_weights`].
    #[cfg(test)]
    pub(crate) fn test_weights(weights: Vec<f64>, lambda: f64) -> Self {
        WeightVector { weights, lambda }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, position: usize) -> f64 {
        self.weights[position]
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Result of parsing one verbalized-confidence reply.
#[derive(Debug, Clone, PartialEq)]
pub struct VerbalParse {
    /// Maximum stated probability, clamped to `[0, 1]`.
    pub confidence: f64,
    /// Recoverable oddities encountered while parsing.
    pub warnings: Vec<ParseWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseWarning {
    /// A `P<k>:` line whose value did not parse as a finite float.
    UnparseableProbability { line_no: usize },
    /// A probability outside `[0, 1]`, clamped.
    ClampedProbability { line_no: usize, raw: f64 },
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseWarning::UnparseableProbability { line_no } => {
                write!(f, "line {line_no}: probability did not parse; line skipped")
            }
            ParseWarning::ClampedProbability { line_no, raw } => {
                write!(f, "line {line_no}: probability {raw} clamped to [0, 1]")
            }
        }
    }
}

/// Extracts the confidence from a guesses-with-probabilities reply.
///
/// Scans every line of the form `P<k>: <float>` (case-insensitive `P`,
/// optional whitespace around the colon) and returns the maximum stated
/// probability, clamping each value to `[0, 1]`. Guess lines (`G<k>: ...`)
/// and any other text are ignored. A line whose value fails to parse — after
/// falling back to its first whitespace-separated token, so trailing
/// commentary is tolerated — is skipped with a warning; if every candidate
/// line fails, that is an error.
pub fn parse_verbal_response(text: &str) -> Result<VerbalParse, ConfidenceError> {
    let mut best: Option<f64> = None;
    let mut warnings = Vec::new();
    let mut saw_candidate = false;
    let mut first_failure = None;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let rest = match probability_payload(line) {
            Some(rest) => rest,
            None => continue,
        };
        saw_candidate = true;
        let parsed = rest
            .parse::<f64>()
            .ok()
            .or_else(|| rest.split_whitespace().next()?.parse::<f64>().ok())
            .filter(|v| v.is_finite());
        let Some(value) = parsed else {
            warnings.push(ParseWarning::UnparseableProbability { line_no });
            first_failure.get_or_insert(line_no);
            continue;
        };
        let clamped = value.clamp(0.0, 1.0);
        if clamped != value {
            warnings.push(ParseWarning::ClampedProbability {
                line_no,
                raw: value,
            });
        }
        best = Some(match best {
            Some(b) => b.max(clamped),
            None => clamped,
        });
    }

    match best {
        Some(confidence) => Ok(VerbalParse {
            confidence,
            warnings,
        }),
        None if saw_candidate => Err(ConfidenceError::UnparseableProbability(
            first_failure.unwrap_or(1),
        )),
        None => Err(ConfidenceError::NoProbabilityFound),
    }
}

/// Returns the value part of a `P<k>: <value>` line, if the line is one.
fn probability_payload(line: &str) -> Option<&str> {
    let trimmed = line.trim_start();
    let rest = trimmed.strip_prefix(['P', 'p'])?;
    let digits = rest.len() - rest.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    let rest = rest[digits..].trim_start();
    Some(rest.strip_prefix(':')?.trim())
}

/// Length-normalized answer log-likelihood per example:
/// `c(j) = (Σ logprob) / token_count`.
///
/// `records` holds `(id, answer token logprobs)` in any order; every pool
/// example must be covered and every token list must be non-empty.
pub fn loglik_confidence(
    pool: &Pool,
    records: &[(String, Vec<f64>)],
) -> Result<RawConfidence, ConfidenceError> {
    let mut entries = Vec::with_capacity(records.len());
    for (id, logprobs) in records {
        if logprobs.is_empty() {
            return Err(ConfidenceError::EmptyAnswerTokens(id.clone()));
        }
        let sum: f64 = logprobs.iter().sum();
        entries.push((id.clone(), sum / logprobs.len() as f64));
    }
    RawConfidence::from_entries(pool, &entries, ConfidenceSource::Loglik)
}

/// Pool-wide min-max normalization: `c̃(j) = (c(j) - min) / (max - min)`.
///
/// When all raw scores are equal the spread carries no information and every
/// example gets the neutral value 0.5.
pub fn normalize(raw: &RawConfidence) -> ConfidenceVector {
    let min = raw.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = raw.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let values = if max == min {
        alloc::vec![0.5; raw.values.len()]
    } else {
        let span = max - min;
        raw.values
            .iter()
            .map(|&v| ((v - min) / span).clamp(0.0, 1.0))
            .collect()
    };
    ConfidenceVector { values }
}

/// Importance weights `w(j) = (1 - λ) + λ·(1 - c̃(j))` for `λ ∈ [0, 1]`.
pub fn compute_weights(
    conf: &ConfidenceVector,
    lambda: f64,
) -> Result<WeightVector, ConfidenceError> {
    if !lambda.is_finite() || !(0.0..=1.0).contains(&lambda) {
        return Err(ConfidenceError::LambdaOutOfRange(lambda));
    }
    let weights = conf
        .values
        .iter()
        .map(|&c| (1.0 - lambda) + lambda * (1.0 - c))
        .collect();
    Ok(WeightVector { weights, lambda })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfidenceError {
    NoProbabilityFound,
    /// Every candidate probability line failed to parse; carries the first
    /// offending line number.
    UnparseableProbability(usize),
    EmptyAnswerTokens(String),
    IncompleteCoverage(Vec<String>),
    UnknownId(String),
    DuplicateEntry(String),
    NonFiniteValue {
        position: usize,
    },
    VerbalOutOfRange {
        position: usize,
        value: f64,
    },
    LambdaOutOfRange(f64),
}

impl fmt::Display for ConfidenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfidenceError::NoProbabilityFound => {
                f.write_str("reply contains no P<k>: probability line")
            }
            ConfidenceError::UnparseableProbability(line_no) => {
                write!(
                    f,
                    "no probability line parsed; first failure at line {line_no}"
                )
            }
            ConfidenceError::EmptyAnswerTokens(id) => {
                write!(f, "record for {id:?} has no answer token logprobs")
            }
            ConfidenceError::IncompleteCoverage(missing) => {
                write!(
                    f,
                    "confidence entries missing for {} example(s):",
                    missing.len()
                )?;
                for id in missing.iter().take(5) {
                    write!(f, " {id:?}")?;
                }
                if missing.len() > 5 {
                    write!(f, " ...")?;
                }
                Ok(())
            }
            ConfidenceError::UnknownId(id) => {
                write!(f, "confidence entry for {id:?} which is not in the pool")
            }
            ConfidenceError::DuplicateEntry(id) => {
                write!(f, "duplicate confidence entry for {id:?}")
            }
            ConfidenceError::NonFiniteValue { position } => {
                write!(f, "confidence at position {position} is not finite")
            }
            ConfidenceError::VerbalOutOfRange { position, value } => {
                write!(
                    f,
                    "confidence {value} at position {position} outside [0, 1]"
                )
            }
            ConfidenceError::LambdaOutOfRange(l) => {
                write!(f, "difficulty weight lambda must lie in [0, 1], got {l}")
            }
        }
    }
}

impl core::error::Error for ConfidenceError {}
