//! Normal-Gamma conjugacy for the block model: sufficient statistics,
//! posterior updates, marginal likelihoods, and block-wise sampling of
//! the mean and precision matrices.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::elastic::SimilarityMatrix;
use crate::math::ln_gamma;

use super::PriorConfig;

/// Sufficient statistics of one block's entries.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BlockStats {
    pub m: usize,
    sum: f64,
    sum_sq: f64,
}

impl BlockStats {
    pub fn push(&mut self, x: f64) {
        self.m += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut s = Self::default();
        for &x in xs {
            s.push(x);
        }
        s
    }

    pub fn remove(&mut self, x: f64) {
        debug_assert!(self.m > 0);
        self.m -= 1;
        self.sum -= x;
        self.sum_sq -= x * x;
    }

    pub fn merged(&self, other: &BlockStats) -> BlockStats {
        BlockStats {
            m: self.m + other.m,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.m == 0 {
            0.0
        } else {
            self.sum / self.m as f64
        }
    }

    /// Centered sum of squares Σ(x − x̄)².
    pub fn center_sq(&self) -> f64 {
        if self.m == 0 {
            0.0
        } else {
            (self.sum_sq - self.sum * self.sum / self.m as f64).max(0.0)
        }
    }
}

/// Normal-Gamma prior on a block's (mean, precision):
/// T ~ Gamma(alpha, beta), U | T ~ N(mu0, (k0 T)⁻¹).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalGamma {
    pub mu0: f64,
    pub k0: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl NormalGamma {
    /// Posterior after absorbing a block's entries; with m = 0 this is
    /// the prior itself.
    pub fn posterior(&self, stats: &BlockStats) -> NormalGamma {
        let m = stats.m as f64;
        let mean = stats.mean();
        let k_n = self.k0 + m;
        NormalGamma {
            mu0: (self.k0 * self.mu0 + m * mean) / k_n,
            k0: k_n,
            alpha: self.alpha + m / 2.0,
            beta: self.beta
                + 0.5 * stats.center_sq()
                + self.k0 * m * (mean - self.mu0) * (mean - self.mu0) / (2.0 * k_n),
        }
    }

    /// Log of the marginal likelihood ∫∫ Π N(x | u, t⁻¹) dNG(u, t) of the
    /// block's entries.
    pub fn log_marginal(&self, stats: &BlockStats) -> f64 {
        if stats.m == 0 {
            return 0.0;
        }
        let post = self.posterior(stats);
        ln_gamma(post.alpha) - ln_gamma(self.alpha) + self.alpha * self.beta.ln()
            - post.alpha * post.beta.ln()
            + 0.5 * (self.k0.ln() - post.k0.ln())
            - 0.5 * stats.m as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// Draw (U, T): T from the Gamma marginal, U from N(mu0, (k0 T)⁻¹).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let t: f64 = Gamma::new(self.alpha, 1.0 / self.beta)
            .expect("positive shape and rate")
            .sample(rng);
        let std_norm: f64 = StandardNormal.sample(rng);
        let u = self.mu0 + std_norm / (self.k0 * t).sqrt();
        (u, t)
    }
}

/// Collect sufficient statistics for every unordered block (r, s) from
/// the modeled entries of Z (strict upper triangle; the diagonal joins
/// in only when the prior asks for it).
pub fn block_stats(zmat: &SimilarityMatrix, labels: &[usize], k: usize, include_diagonal: bool) -> Vec<Vec<BlockStats>> {
    let n = labels.len();
    let mut stats = vec![vec![BlockStats::default(); k]; k];
    for i in 0..n {
        for j in (i + 1)..n {
            let (r, s) = order(labels[i], labels[j]);
            stats[r][s].push(zmat.z(i, j));
        }
        if include_diagonal {
            let c = labels[i];
            stats[c][c].push(zmat.z(i, i));
        }
    }
    stats
}

#[inline]
pub fn order(a: usize, b: usize) -> (usize, usize) {
    if a <= b { (a, b) } else { (b, a) }
}

/// Draw the symmetric block mean and precision matrices from their
/// conditional given the labels: every unordered block independently
/// from its Normal-Gamma posterior (empty blocks from the prior).
pub fn sample_blocks<R: Rng>(
    zmat: &SimilarityMatrix,
    labels: &[usize],
    prior: &PriorConfig,
    rng: &mut R,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let stats = block_stats(zmat, labels, k, prior.include_diagonal);
    let mut u = vec![vec![0.0; k]; k];
    let mut t = vec![vec![0.0; k]; k];
    for r in 0..k {
        for s in r..k {
            let ng = prior.block_prior(r == s).posterior(&stats[r][s]);
            let (u_rs, t_rs) = ng.sample(rng);
            u[r][s] = u_rs;
            u[s][r] = u_rs;
            t[r][s] = t_rs;
            t[s][r] = t_rs;
        }
    }
    (u, t)
}
