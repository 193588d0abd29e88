//! The Bayesian core: a block-Normal model on the Fisher-transformed
//! similarity matrix with a mixture-of-finite-mixtures prior on the
//! partition, optionally weighted by a Markov random field over the
//! spatial neighborhood graph (MRFC-MFM; `lambda = 0` is plain MFM).

mod blocks;
mod sampler;
mod vn;

pub use blocks::{block_stats, sample_blocks, BlockStats, NormalGamma};
pub use sampler::{
    compact_labels, gibbs_sweep, joint_log_likelihood, label_weights, label_weights_collapsed,
    run_chain, Scoring, REMOVED,
};
pub use vn::{log_vn_table, KPrior, LogVnTable};

use serde::{Deserialize, Serialize};

use crate::elastic::SimilarityMatrix;
use crate::error::{Error, Result};

/// Hyperparameters of the MRFC-MFM block model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Dirichlet concentration γ of the mixture weights.
    pub gamma_dir: f64,
    /// Gamma shape on the block precisions.
    pub alpha: f64,
    /// Gamma rate on the block precisions.
    pub beta: f64,
    /// Prior precision scale of the block means.
    pub k0: f64,
    /// Prior mean for diagonal (within-cluster) blocks.
    pub mu0_diag: f64,
    /// Prior mean for off-diagonal (between-cluster) blocks.
    pub mu0_offdiag: f64,
    /// Spatial smoothness; 0 disables the MRF term.
    pub lambda: f64,
    /// Prior on the number of components.
    pub k_prior: KPrior,
    /// Model the clipped diagonal of Z alongside the strict upper
    /// triangle (off by default; sensitivity checks only).
    pub include_diagonal: bool,
}

impl PriorConfig {
    /// Reference defaults: γ = α = β = 1, k0 = 2, truncated
    /// Poisson(1) on k, λ = 0, and the informative μ0 rule — the max of
    /// the strict upper triangle of Z for diagonal blocks, the min for
    /// off-diagonal blocks.
    pub fn default_for(zmat: &SimilarityMatrix) -> Self {
        let n = zmat.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                lo = lo.min(zmat.z(i, j));
                hi = hi.max(zmat.z(i, j));
            }
        }
        Self {
            gamma_dir: 1.0,
            alpha: 1.0,
            beta: 1.0,
            k0: 2.0,
            mu0_diag: hi,
            mu0_offdiag: lo,
            lambda: 0.0,
            k_prior: KPrior::default(),
            include_diagonal: false,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_dir", self.gamma_dir),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("k0", self.k0),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::invalid("lambda must be nonnegative"));
        }
        if !self.mu0_diag.is_finite() || !self.mu0_offdiag.is_finite() {
            return Err(Error::invalid("mu0 values must be finite"));
        }
        Ok(())
    }

    pub(crate) fn block_prior(&self, diagonal: bool) -> NormalGamma {
        NormalGamma {
            mu0: if diagonal { self.mu0_diag } else { self.mu0_offdiag },
            k0: self.k0,
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// How the sampler starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// Allocate nodes uniformly at random among this many clusters
    /// (the default is nine, then compacted).
    RandomClusters(usize),
    SingleCluster,
    Labels(Vec<usize>),
}

impl Default for Init {
    fn default() -> Self {
        Init::RandomClusters(9)
    }
}

/// Run-length knobs for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    pub iterations: usize,
    pub burn_in: usize,
    pub init: Init,
    pub seed: u64,
    #[serde(default)]
    pub scoring: Scoring,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            iterations: 500,
            burn_in: 250,
            init: Init::default(),
            seed: 0,
            scoring: Scoring::default(),
        }
    }
}

/// One recorded sweep: compact labels plus the explicit block matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    /// 0-based compact cluster labels.
    pub z: Vec<usize>,
    /// Symmetric K×K block means.
    pub u: Vec<Vec<f64>>,
    /// Symmetric K×K block precisions.
    pub t: Vec<Vec<f64>>,
    /// 1-based sweep index within the chain.
    pub iteration: usize,
}

impl ChainState {
    pub fn k(&self) -> usize {
        self.u.len()
    }
}

/// Post-burn-in snapshots plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub n: usize,
    pub states: Vec<ChainState>,
    /// Joint log likelihood of the modeled entries at each snapshot.
    pub log_likelihoods: Vec<f64>,
    pub seed: u64,
    pub prior: PriorConfig,
    pub iterations: usize,
    pub burn_in: usize,
    pub neighbor_limit: usize,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}
