//! Budgeted evaluation-subset selection via monotone submodular maximization.
//!
//! Given a pool of candidate evaluation examples, this crate selects a subset
//! of at most `k` examples that maximizes one of three set objectives:
//!
//! - **rep** — facility location over a pairwise similarity matrix: every pool
//!   element contributes its similarity to its nearest selected neighbor, so a
//!   high-scoring subset contains good representatives for every region of
//!   the pool.
//! - **lc** — least confidence: a modular sum of per-example uncertainty
//!   `1 - c̃(j)` over the selected examples, favoring the ones a scorer model
//!   finds hard.
//! - **wrep** — confidence-weighted facility location: coverage weighted per
//!   element by `w(j) = (1 - λ) + λ·(1 - c̃(j))`, concentrating coverage on
//!   low-confidence examples as `λ` grows.
//!
//! All three are non-negative, monotone, and submodular on valid inputs
//! (`sim ∈ [0,1]`, `w ≥ 0`, `c̃ ∈ [0,1]`), so the greedy algorithm in
//! [`selection`] carries the classic `(1 - 1/e)` approximation guarantee.
//! The [`oracle`] module provides a brute-force optimizer and mechanical
//! checkers for those structural properties, and [`simharness`] is a
//! deterministic synthetic prompt-optimization loop for comparing selectors
//! end to end.
//!
//! The crate is `no_std`-compatible (requires `alloc`); file formats, the
//! scorer HTTP client, and the CLI live in the companion `sess` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod confidence;
pub mod corpus;
pub mod objectives;
pub mod oracle;
pub mod selection;
pub mod simharness;
pub mod similarity;

mod math;
