//! Precomputed V_n(w) coefficients of the mixture-of-finite-mixtures urn.
//!
//! V_n(w) = Σ_k k_(w) / (γk)^(n) · p(k), summed over the prior on the
//! number of components; the ratio V_n(w+1)/V_n(w) throttles the opening
//! of new clusters relative to the Chinese restaurant process.

use serde::{Deserialize, Serialize};

use crate::math::{ln_gamma, log_sum_exp};

/// Prior on the number of mixture components (support {1, 2, ...}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KPrior {
    /// Poisson(rate) truncated to the positive integers (the default,
    /// rate 1).
    TruncatedPoisson { rate: f64 },
    /// Uniform on {1, ..., max}; handy for tests and sensitivity runs.
    Uniform { max: usize },
}

impl Default for KPrior {
    fn default() -> Self {
        KPrior::TruncatedPoisson { rate: 1.0 }
    }
}

impl KPrior {
    /// Log p.m.f. at k >= 1; −∞ outside the support.
    pub fn log_pmf(&self, k: usize) -> f64 {
        if k == 0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            KPrior::TruncatedPoisson { rate } => {
                let k_f = k as f64;
                -rate + k_f * rate.ln() - ln_gamma(k_f + 1.0) - (-(-rate).exp_m1()).ln()
            }
            KPrior::Uniform { max } => {
                if k <= max {
                    -(max as f64).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// Table of log V_n(w) for w = 1..=n+1.
#[derive(Debug, Clone, PartialEq)]
pub struct LogVnTable {
    n: usize,
    gamma_dir: f64,
    log_vn: Vec<f64>,
}

const K_MAX: usize = 500;
const TAIL_REL: f64 = 1e-12;

/// Build the table by log-space summation over k, truncated once the
/// running tail drops below `TAIL_REL` relative (hard cap k = 500).
pub fn log_vn_table(n: usize, gamma_dir: f64, k_prior: &KPrior) -> LogVnTable {
    assert!(n >= 1, "V_n needs n >= 1");
    assert!(gamma_dir > 0.0, "Dirichlet concentration must be positive");
    let log_tail = TAIL_REL.ln();
    let mut log_vn = Vec::with_capacity(n + 1);
    for w in 1..=n + 1 {
        let mut terms: Vec<f64> = Vec::new();
        // k_(w) vanishes for k < w, so the sum starts at k = w
        for k in w..=K_MAX {
            let k_f = k as f64;
            let lp = k_prior.log_pmf(k);
            if lp == f64::NEG_INFINITY {
                continue;
            }
            let log_falling = ln_gamma(k_f + 1.0) - ln_gamma(k_f - w as f64 + 1.0);
            let log_rising = ln_gamma(gamma_dir * k_f + n as f64) - ln_gamma(gamma_dir * k_f);
            let term = lp + log_falling - log_rising;
            terms.push(term);
            let running = log_sum_exp(&terms);
            if terms.len() >= 3 && term < running + log_tail {
                break;
            }
        }
        log_vn.push(log_sum_exp(&terms));
    }
    LogVnTable {
        n,
        gamma_dir,
        log_vn,
    }
}

impl LogVnTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma_dir(&self) -> f64 {
        self.gamma_dir
    }

    /// log V_n(w), valid for w = 1..=n+1.
    pub fn log_vn(&self, w: usize) -> f64 {
        assert!(w >= 1 && w <= self.n + 1, "w = {w} outside 1..={}", self.n + 1);
        self.log_vn[w - 1]
    }

    /// log of the new-table factor V_n(w+1)/V_n(w).
    pub fn log_ratio(&self, w: usize) -> f64 {
        self.log_vn(w + 1) - self.log_vn(w)
    }
}
