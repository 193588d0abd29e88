//! Spatially constrained Bayesian nonparametric clustering of income
//! distributions represented as Lorenz curves.
//!
//! The pipeline has five stages, each with its own module:
//!
//! 1. [`income`] — simulate household incomes and turn samples into
//!    empirical Lorenz curves and Gini coefficients.
//! 2. [`elastic`] — square-root velocity representations, optimal
//!    reparameterization by dynamic programming, and the pairwise
//!    similarity matrix with its Fisher Z-transform.
//! 3. [`graph`] — spatial adjacency and graph-distance neighborhoods.
//! 4. [`mfm`] — the mixture-of-finite-mixtures block model and the
//!    collapsed Gibbs sampler, with optional Markov-random-field
//!    weighting of the label urn (MRFC-MFM; plain MFM is `lambda = 0`).
//! 5. [`posterior`] — Dahl summarization, adjusted Rand index, mDIC
//!    model selection, and the K-means baseline.
//!
//! [`designs`] ships the synthetic partition designs used by the
//! replication harness in [`replicate`], and [`io`] reads and writes
//! the on-disk formats shared with the command-line tool.

pub mod designs;
pub mod elastic;
pub mod error;
pub mod graph;
pub mod income;
pub mod io;
mod math;
pub mod mfm;
pub mod posterior;
pub mod replicate;
pub mod seed;

pub use error::{Error, Result};
