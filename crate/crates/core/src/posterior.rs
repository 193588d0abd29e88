//! Posterior summarization and evaluation: Dahl's least-squares
//! partition, (adjusted) Rand indices, the modified DIC, the grid search
//! over the smoothness parameter and the neighbor limit, and the
//! K-means baseline on raw SRVF vectors.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elastic::{SimilarityMatrix, Srvf};
use crate::error::{Error, Result};
use crate::graph::neighborhoods;
use crate::mfm::{run_chain, ChainOptions, ChainTrace, PriorConfig, Scoring};
use crate::seed::{derive_seed_labeled, f64_part, rng_from};

/// Dahl-selected point estimate plus the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub n: usize,
    /// Sweep index (within the chain) of the selected iteration.
    pub selected_iteration: usize,
    /// 0-based compact labels of the selected iteration.
    pub z_hat: Vec<usize>,
    pub u_hat: Vec<Vec<f64>>,
    pub t_hat: Vec<Vec<f64>>,
    /// Mean pairwise co-clustering probabilities, row-major n×n.
    pub mean_pairwise: Vec<f64>,
    pub mdic: Option<f64>,
    pub lambda: f64,
    pub neighbor_limit: usize,
}

impl PosteriorSummary {
    pub fn k_hat(&self) -> usize {
        self.u_hat.len()
    }
}

/// Mean of the membership matrices B(i,j) = 1(z_i = z_j) over a trace.
pub fn membership_mean(trace: &ChainTrace) -> Vec<f64> {
    let n = trace.n;
    let mut mean = vec![0.0; n * n];
    for state in &trace.states {
        for i in 0..n {
            for j in 0..n {
                if state.z[i] == state.z[j] {
                    mean[i * n + j] += 1.0;
                }
            }
        }
    }
    let m = trace.len() as f64;
    for v in &mut mean {
        *v /= m;
    }
    mean
}

/// Dahl's method: return the recorded iteration whose membership matrix
/// is closest in squared distance to the mean membership matrix (ties
/// broken toward the earliest iteration).
pub fn dahl_summary(trace: &ChainTrace) -> Result<PosteriorSummary> {
    if trace.is_empty() {
        return Err(Error::invalid("empty trace"));
    }
    let n = trace.n;
    let mean = membership_mean(trace);
    let mut best = f64::INFINITY;
    let mut best_idx = 0;
    for (idx, state) in trace.states.iter().enumerate() {
        let mut dist = 0.0;
        for i in 0..n {
            for j in 0..n {
                let b = if state.z[i] == state.z[j] { 1.0 } else { 0.0 };
                let d = b - mean[i * n + j];
                dist += d * d;
            }
        }
        if dist < best {
            best = dist;
            best_idx = idx;
        }
    }
    let chosen = &trace.states[best_idx];
    Ok(PosteriorSummary {
        n,
        selected_iteration: chosen.iteration,
        z_hat: chosen.z.clone(),
        u_hat: chosen.u.clone(),
        t_hat: chosen.t.clone(),
        mean_pairwise: mean,
        mdic: None,
        lambda: trace.prior.lambda,
        neighbor_limit: trace.neighbor_limit,
    })
}

fn comb2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

fn contingency(z1: &[usize], z2: &[usize]) -> (Vec<f64>, Vec<f64>, f64) {
    let k1 = z1.iter().copied().max().unwrap_or(0) + 1;
    let k2 = z2.iter().copied().max().unwrap_or(0) + 1;
    let mut table = vec![0.0f64; k1 * k2];
    for (&a, &b) in z1.iter().zip(z2) {
        table[a * k2 + b] += 1.0;
    }
    let rows: Vec<f64> = (0..k1).map(|r| table[r * k2..(r + 1) * k2].iter().sum()).collect();
    let cols: Vec<f64> = (0..k2).map(|c| (0..k1).map(|r| table[r * k2 + c]).sum()).collect();
    let pairs_same_both: f64 = table.iter().map(|&v| comb2(v)).sum();
    (rows, cols, pairs_same_both)
}

/// Adjusted Rand index by pair counting. Returns 1 when the chance
/// correction makes the denominator vanish (both partitions trivial in
/// the same way). Can be negative for worse-than-chance agreement.
pub fn adjusted_rand_index(z1: &[usize], z2: &[usize]) -> Result<f64> {
    if z1.len() != z2.len() {
        return Err(Error::invalid(format!(
            "label lengths differ: {} vs {}",
            z1.len(),
            z2.len()
        )));
    }
    if z1.len() < 2 {
        return Err(Error::invalid("ARI needs at least 2 items"));
    }
    let (rows, cols, index) = contingency(z1, z2);
    let sum_rows: f64 = rows.iter().map(|&v| comb2(v)).sum();
    let sum_cols: f64 = cols.iter().map(|&v| comb2(v)).sum();
    let expected = sum_rows * sum_cols / comb2(z1.len() as f64);
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Plain Rand index: fraction of concordant pairs.
pub fn rand_index(z1: &[usize], z2: &[usize]) -> Result<f64> {
    if z1.len() != z2.len() || z1.len() < 2 {
        return Err(Error::invalid("rand index needs equal lengths >= 2"));
    }
    let n = z1.len();
    let mut agree = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let same1 = z1[i] == z1[j];
            let same2 = z2[i] == z2[j];
            if same1 == same2 {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / (n * (n - 1) / 2) as f64)
}

/// Which entry count multiplies p_D in the mDIC penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdicPenalty {
    /// log(n(n+1)/2), the printed form (counts the diagonal).
    WithDiagonal,
    /// log(n(n−1)/2), matching the strict-upper-triangle likelihood.
    StrictUpper,
}

impl Default for MdicPenalty {
    fn default() -> Self {
        MdicPenalty::WithDiagonal
    }
}

fn deviance(zmat: &SimilarityMatrix, state_z: &[usize], u: &[Vec<f64>], t: &[Vec<f64>], include_diagonal: bool) -> f64 {
    -2.0 * crate::mfm::joint_log_likelihood(zmat, state_z, u, t, include_diagonal)
}

/// Modified DIC: Dev(θ̂) + log(modeled entry count)·p_D with θ̂ the
/// Dahl-selected iteration and p_D the mean trace deviance minus Dev(θ̂).
pub fn mdic(
    zmat: &SimilarityMatrix,
    trace: &ChainTrace,
    summary: &PosteriorSummary,
    penalty: MdicPenalty,
) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::invalid("empty trace"));
    }
    if trace.n != summary.n {
        return Err(Error::invalid("summary and trace sizes disagree"));
    }
    let include_diagonal = trace.prior.include_diagonal;
    let dev_hat = deviance(zmat, &summary.z_hat, &summary.u_hat, &summary.t_hat, include_diagonal);
    let mean_dev = trace
        .states
        .iter()
        .map(|s| deviance(zmat, &s.z, &s.u, &s.t, include_diagonal))
        .sum::<f64>()
        / trace.len() as f64;
    let p_d = mean_dev - dev_hat;
    let n = trace.n as f64;
    let count = match penalty {
        MdicPenalty::WithDiagonal => n * (n + 1.0) / 2.0,
        MdicPenalty::StrictUpper => n * (n - 1.0) / 2.0,
    };
    Ok(dev_hat + count.ln() * p_d)
}

/// Settings for the (λ, neighbor limit) grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub lambda_grid: Vec<f64>,
    pub limit_grid: Vec<usize>,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    #[serde(default)]
    pub penalty: MdicPenalty,
    #[serde(default)]
    pub scoring: Scoring,
}

/// One grid point's full output.
#[derive(Debug, Clone)]
pub struct ComboResult {
    pub lambda: f64,
    pub neighbor_limit: usize,
    pub summary: PosteriorSummary,
    pub trace: ChainTrace,
    pub runtime_ms: u128,
}

/// Grid search output with the mDIC-selected pair first-class.
#[derive(Debug, Clone)]
pub struct ModelSelection {
    pub combos: Vec<ComboResult>,
    pub best_lambda: f64,
    pub best_limit: usize,
}

impl ModelSelection {
    pub fn best(&self) -> &ComboResult {
        self.combos
            .iter()
            .find(|c| c.lambda == self.best_lambda && c.neighbor_limit == self.best_limit)
            .expect("best combo present")
    }
}

/// Deterministic per-combo chain seed.
pub fn combo_seed(seed: u64, lambda: f64, limit: usize) -> u64 {
    derive_seed_labeled(seed, "chain", &[f64_part(lambda), limit as u64])
}

/// Run one chain per (λ, limit) pair, summarize by Dahl's method, score
/// by mDIC, and pick the argmin (ties: smaller λ, then smaller limit).
/// Grid points run in parallel; output order and the selected pair do
/// not depend on scheduling.
pub fn select_model(
    zmat: &SimilarityMatrix,
    node_ids: &[String],
    edges: &[(usize, usize)],
    base_prior: &PriorConfig,
    cfg: &SelectConfig,
) -> Result<ModelSelection> {
    if cfg.lambda_grid.is_empty() || cfg.limit_grid.is_empty() {
        return Err(Error::invalid("grids must be nonempty"));
    }
    let grid: Vec<(f64, usize)> = cfg
        .lambda_grid
        .iter()
        .flat_map(|&l| cfg.limit_grid.iter().map(move |&d| (l, d)))
        .collect();
    let combos: Vec<ComboResult> = grid
        .par_iter()
        .map(|&(lambda, limit)| {
            let graph = neighborhoods(node_ids.to_vec(), edges.to_vec(), limit)?;
            let prior = base_prior.clone().with_lambda(lambda);
            let opts = ChainOptions {
                iterations: cfg.iterations,
                burn_in: cfg.burn_in,
                init: Default::default(),
                seed: combo_seed(cfg.seed, lambda, limit),
                scoring: cfg.scoring,
            };
            let start = std::time::Instant::now();
            let trace = run_chain(zmat, &graph, &prior, &opts)?;
            let runtime_ms = start.elapsed().as_millis();
            let mut summary = dahl_summary(&trace)?;
            summary.mdic = Some(mdic(zmat, &trace, &summary, cfg.penalty)?);
            Ok(ComboResult {
                lambda,
                neighbor_limit: limit,
                summary,
                trace,
                runtime_ms,
            })
        })
        .collect::<Result<_>>()?;

    let mut best = &combos[0];
    for c in &combos[1..] {
        let (a, b) = (c.summary.mdic.unwrap(), best.summary.mdic.unwrap());
        if a < b
            || (a == b && c.lambda < best.lambda)
            || (a == b && c.lambda == best.lambda && c.neighbor_limit < best.neighbor_limit)
        {
            best = c;
        }
    }
    let (best_lambda, best_limit) = (best.lambda, best.neighbor_limit);
    Ok(ModelSelection {
        combos,
        best_lambda,
        best_limit,
    })
}

/// Lloyd's K-means on raw SRVF vectors; best of `restarts` seeded
/// k-means++ initializations by within-cluster sum of squares.
pub fn kmeans_baseline(srvfs: &[Srvf], k: usize, seed: u64, restarts: usize) -> Result<Vec<usize>> {
    let n = srvfs.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} outside 1..={n}")));
    }
    let dim = srvfs[0].q.len();
    if srvfs.iter().any(|s| s.q.len() != dim) {
        return Err(Error::GridMismatch("srvf vectors differ in length".into()));
    }
    let points: Vec<&[f64]> = srvfs.iter().map(|s| s.q.as_slice()).collect();

    let mut best_labels = vec![0; n];
    let mut best_wcss = f64::INFINITY;
    for restart in 0..restarts.max(1) {
        let mut rng = rng_from(derive_seed_labeled(seed, "kmeans", &[restart as u64]));
        let (labels, wcss) = lloyd_once(&points, k, &mut rng);
        if wcss < best_wcss {
            best_wcss = wcss;
            best_labels = labels;
        }
    }
    Ok(best_labels)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lloyd_once<R: Rng>(points: &[&[f64]], k: usize, rng: &mut R) -> (Vec<usize>, f64) {
    let n = points.len();
    let dim = points[0].len();

    // classical random start: k distinct points as initial centers
    let mut picks: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        picks.swap(i, j);
    }
    let centers: Vec<Vec<f64>> = picks[..k].iter().map(|&i| points[i].to_vec()).collect();
    let mut centers = centers;

    let mut labels = vec![0usize; n];
    // ten Lloyd sweeps, matching the reference baseline's default cap
    for _ in 0..10 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = f64::INFINITY;
            let mut arg = labels[i];
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(p, center);
                if d < best {
                    best = d;
                    arg = c;
                }
            }
            if arg != labels[i] {
                labels[i] = arg;
                changed = true;
            }
        }
        // recompute centers; empty clusters adopt the farthest point
        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; dim]; k];
        for (i, p) in points.iter().enumerate() {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i]].iter_mut().zip(*p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(points[a], &centers[labels[a]])
                            .total_cmp(&sq_dist(points[b], &centers[labels[b]]))
                    })
                    .unwrap();
                centers[c] = points[far].to_vec();
                labels[far] = c;
            } else {
                for (d, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *d = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let wcss: f64 = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum();
    (labels, wcss)
}

/// How many summaries inferred exactly `k_true` clusters.
pub fn k_recovery_count(summaries: &[PosteriorSummary], k_true: usize) -> usize {
    summaries.iter().filter(|s| s.k_hat() == k_true).count()
}
