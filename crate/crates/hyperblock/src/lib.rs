//! Stochastic blockmodels for simple hypergraphs.
//!
//! A simple hypergraph is a set of nodes together with hyperedges that are
//! *sets* of at least two distinct nodes — no repeated nodes, no self-loops.
//! This crate models such data with latent node groups: conditionally on the
//! groups, every possible hyperedge of size `2..=M` is an independent
//! Bernoulli draw whose parameter depends only on the (unordered) group
//! configuration of its nodes.
//!
//! What is here:
//!
//! - [`hypergraph`]: the core data structure, canonicalization, text I/O and
//!   bipartite (paper/author) ingestion;
//! - [`simplex`]: bijective ranking of sorted group multisets onto flat
//!   tensor indices, which is how symmetric connectivity tensors are stored;
//! - [`model`]: parameters, affiliation submodels, a seeded generative
//!   sampler and exact likelihoods (the brute-force reference);
//! - [`sums`]: the performance core — exact sums of responsibility products
//!   over tuples of pairwise-distinct nodes, factorized so that sparse
//!   hypergraphs are cheap;
//! - [`vem`]: variational EM — ELBO, fixed-point VE step, closed-form M
//!   steps, initialization and stopping logic;
//! - [`spectral`]: spectral initializers (hypergraph Laplacian embedding with
//!   soft k-means, and absolute spectral clustering on the size-2 slice);
//! - [`metrics`]: ICL model selection, ARI, MSRE and detectability
//!   thresholds;
//! - [`synth`]: synthetic data factories (sparse scenario presets and the
//!   line-clustering construction).
//!
//! Everything randomized is deterministic given a seed, and parallel
//! execution (the `parallel` feature, on by default) reduces in a fixed
//! order, so results do not depend on the number of worker threads.

pub mod error;
pub mod exec;
pub mod hypergraph;
pub mod metrics;
pub mod model;
pub mod simplex;
pub mod spectral;
pub mod sums;
pub mod synth;
pub mod vem;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
pub use hypergraph::Hypergraph;
pub use model::HsbmParams;
pub use vem::{FitConfig, FitResult, VariationalState};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` inside likelihood
/// evaluations so that `log 0` never occurs on the main inference path. The
/// exact-likelihood reference in [`model`] is the one clamp-free exception.
pub const PROB_EPS: f64 = 1e-12;

/// Responsibility floor: rows of a variational state are floored here and
/// renormalized after every update, preventing absorbing zeros.
pub const TAU_FLOOR: f64 = 1e-12;
