//! Collapsed Gibbs sweep over cluster labels.
//!
//! One sweep removes each node in turn, scores every existing cluster —
//! urn weight (n_c + γ) times the MRF factor exp(λ · #{neighbors in c})
//! times the likelihood of the node's row — against a new cluster scored
//! by γ·V_n(K*+1)/V_n(K*) times the prior-predictive marginal of the
//! node's entries, then resamples the label by Gumbel-max. The row
//! likelihood comes in two flavors: `Collapsed` integrates the block
//! parameters out (posterior-predictive given the block's other
//! entries), `Explicit` conditions on the sampled (U, T). New clusters
//! instantiate their blocks from the conjugate posterior given the
//! node's own entries; after the label cycle the full (U, T) is
//! refreshed. The MRF normalizer Z_H is never computed: it cancels in
//! these full-conditional ratios.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::elastic::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::graph::NeighborhoodGraph;
use crate::math::normal_logpdf_prec;
use crate::seed::rng_from;

use super::blocks::{block_stats, sample_blocks, BlockStats};
use super::vn::{log_vn_table, LogVnTable};
use super::{ChainOptions, ChainState, ChainTrace, Init, PriorConfig};

/// Sentinel label for a node lifted out of the partition mid-update.
pub const REMOVED: usize = usize::MAX;

/// How the label full conditionals treat the block parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// Integrate (U, T) out of every label weight (posterior-predictive
    /// scoring). Mixes better and is the default.
    Collapsed,
    /// Condition on the currently sampled (U, T) for existing clusters.
    Explicit,
}

impl Default for Scoring {
    fn default() -> Self {
        Scoring::Collapsed
    }
}

/// Relabel to 0..K in order of first appearance; returns K.
pub fn compact_labels(labels: &mut [usize]) -> usize {
    let mut map: Vec<Option<usize>> = vec![None; labels.len()];
    let mut next = 0;
    for l in labels.iter_mut() {
        let slot = map.get_mut(*l).expect("label within 0..n");
        *l = match slot {
            Some(compact) => *compact,
            None => {
                let compact = next;
                *slot = Some(compact);
                next += 1;
                compact
            }
        };
    }
    next
}

/// Joint log likelihood of the modeled entries of Z under (z, U, T).
pub fn joint_log_likelihood(
    zmat: &SimilarityMatrix,
    labels: &[usize],
    u: &[Vec<f64>],
    t: &[Vec<f64>],
    include_diagonal: bool,
) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (r, s) = (labels[i], labels[j]);
            total += normal_logpdf_prec(zmat.z(i, j), u[r][s], t[r][s]);
        }
        if include_diagonal {
            let c = labels[i];
            total += normal_logpdf_prec(zmat.z(i, i), u[c][c], t[c][c]);
        }
    }
    total
}

/// Node i's entries grouped by the cluster of the other endpoint.
fn entry_stats(
    i: usize,
    zmat: &SimilarityMatrix,
    labels: &[usize],
    k_star: usize,
) -> Vec<BlockStats> {
    let mut stats = vec![BlockStats::default(); k_star];
    for (j, &l) in labels.iter().enumerate() {
        if j != i && l != REMOVED {
            stats[l].push(zmat.z(i, j));
        }
    }
    stats
}

fn urn_and_mrf(
    i: usize,
    labels: &[usize],
    k_star: usize,
    graph: &NeighborhoodGraph,
    prior: &PriorConfig,
) -> Vec<f64> {
    let mut counts = vec![0usize; k_star];
    for (j, &l) in labels.iter().enumerate() {
        if j != i && l != REMOVED {
            counts[l] += 1;
        }
    }
    let mut mrf = vec![0usize; k_star];
    for &l in graph.neighborhood(i) {
        if l != i && labels[l] != REMOVED {
            mrf[labels[l]] += 1;
        }
    }
    (0..k_star)
        .map(|c| (counts[c] as f64 + prior.gamma_dir).ln() + prior.lambda * mrf[c] as f64)
        .collect()
}

/// Unnormalized log weights for reassigning node `i` with the block
/// parameters conditioned on (explicit scoring): one entry per existing
/// cluster followed by one for a new cluster. `labels[i]` must be
/// `REMOVED` and the remaining labels compact over 0..K*.
#[allow(clippy::too_many_arguments)]
pub fn label_weights(
    i: usize,
    zmat: &SimilarityMatrix,
    labels: &[usize],
    u: &[Vec<f64>],
    t: &[Vec<f64>],
    graph: &NeighborhoodGraph,
    prior: &PriorConfig,
    vn: &LogVnTable,
) -> Vec<f64> {
    debug_assert_eq!(labels[i], REMOVED);
    let k_star = u.len();
    let mut weights = urn_and_mrf(i, labels, k_star, graph, prior);
    for (c, w) in weights.iter_mut().enumerate() {
        for (j, &l) in labels.iter().enumerate() {
            if j == i || l == REMOVED {
                continue;
            }
            *w += normal_logpdf_prec(zmat.z(i, j), u[c][l], t[c][l]);
        }
        if prior.include_diagonal {
            *w += normal_logpdf_prec(zmat.z(i, i), u[c][c], t[c][c]);
        }
    }
    weights.push(new_cluster_weight(
        i,
        zmat,
        &entry_stats(i, zmat, labels, k_star),
        prior,
        vn,
        k_star,
    ));
    weights
}

/// Unnormalized log weights with the block parameters integrated out
/// (collapsed scoring). `stats` must hold the modeled entries of every
/// current block, mirrored symmetrically, excluding node `i` entirely.
#[allow(clippy::too_many_arguments)]
pub fn label_weights_collapsed(
    i: usize,
    zmat: &SimilarityMatrix,
    labels: &[usize],
    stats: &[Vec<BlockStats>],
    graph: &NeighborhoodGraph,
    prior: &PriorConfig,
    vn: &LogVnTable,
) -> Vec<f64> {
    debug_assert_eq!(labels[i], REMOVED);
    let k_star = stats.len();
    let own = entry_stats(i, zmat, labels, k_star);
    let mut weights = urn_and_mrf(i, labels, k_star, graph, prior);
    for (c, w) in weights.iter_mut().enumerate() {
        for s in 0..k_star {
            let mut incoming = own[s];
            if prior.include_diagonal && s == c {
                incoming.push(zmat.z(i, i));
            }
            if incoming.m == 0 {
                continue;
            }
            let ng = prior.block_prior(c == s);
            *w += ng.log_marginal(&stats[c][s].merged(&incoming)) - ng.log_marginal(&stats[c][s]);
        }
    }
    weights.push(new_cluster_weight(i, zmat, &own, prior, vn, k_star));
    weights
}

/// Weight of opening a fresh cluster for node i: the urn's new-table
/// factor times the prior-predictive marginal of the node's entries,
/// blockwise per existing cluster.
fn new_cluster_weight(
    i: usize,
    zmat: &SimilarityMatrix,
    own: &[BlockStats],
    prior: &PriorConfig,
    vn: &LogVnTable,
    k_star: usize,
) -> f64 {
    let mut w = prior.gamma_dir.ln() + vn.log_ratio(k_star);
    for s in own.iter().take(k_star) {
        w += prior.block_prior(false).log_marginal(s);
    }
    if prior.include_diagonal {
        let own_diag = BlockStats::from_slice(&[zmat.z(i, i)]);
        w += prior.block_prior(true).log_marginal(&own_diag);
    }
    w
}

fn gumbel_argmax<R: Rng>(log_weights: &[f64], rng: &mut R) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (idx, &w) in log_weights.iter().enumerate() {
        let u: f64 = rng.random();
        let g = -(-(u.max(f64::MIN_POSITIVE)).ln()).ln();
        if w + g > best {
            best = w + g;
            arg = idx;
        }
    }
    arg
}

/// Mirror the upper triangle over the diagonal.
fn mirror_stats(stats: &mut [Vec<BlockStats>]) {
    let k = stats.len();
    for r in 0..k {
        for s in (r + 1)..k {
            stats[s][r] = stats[r][s];
        }
    }
}

struct Sweep {
    z: Vec<usize>,
    u: Vec<Vec<f64>>,
    t: Vec<Vec<f64>>,
    counts: Vec<usize>,
    /// Block sufficient statistics, mirrored symmetrically and updated
    /// incrementally as labels move.
    stats: Vec<Vec<BlockStats>>,
    include_diagonal: bool,
}

impl Sweep {
    fn new(
        z: Vec<usize>,
        u: Vec<Vec<f64>>,
        t: Vec<Vec<f64>>,
        counts: Vec<usize>,
        zmat: &SimilarityMatrix,
        include_diagonal: bool,
    ) -> Self {
        let k = counts.len();
        let mut stats = block_stats(zmat, &z, k, include_diagonal);
        mirror_stats(&mut stats);
        Self {
            z,
            u,
            t,
            counts,
            stats,
            include_diagonal,
        }
    }

    fn k(&self) -> usize {
        self.counts.len()
    }

    fn stat_remove(&mut self, r: usize, s: usize, x: f64) {
        self.stats[r][s].remove(x);
        if r != s {
            let moved = self.stats[r][s];
            self.stats[s][r] = moved;
        }
    }

    fn stat_add(&mut self, r: usize, s: usize, x: f64) {
        self.stats[r][s].push(x);
        if r != s {
            let moved = self.stats[r][s];
            self.stats[s][r] = moved;
        }
    }

    fn remove(&mut self, i: usize, zmat: &SimilarityMatrix) {
        let c = self.z[i];
        for j in 0..self.z.len() {
            let l = self.z[j];
            if j != i && l != REMOVED {
                self.stat_remove(c, l, zmat.z(i, j));
            }
        }
        if self.include_diagonal {
            self.stat_remove(c, c, zmat.z(i, i));
        }
        self.z[i] = REMOVED;
        self.counts[c] -= 1;
        if self.counts[c] == 0 {
            let last = self.k() - 1;
            if c != last {
                for l in self.z.iter_mut() {
                    if *l == last {
                        *l = c;
                    }
                }
                self.counts[c] = self.counts[last];
                swap_square(&mut self.u, c, last);
                swap_square(&mut self.t, c, last);
                swap_square(&mut self.stats, c, last);
            }
            self.counts.pop();
            shrink_square(&mut self.u);
            shrink_square(&mut self.t);
            shrink_square(&mut self.stats);
        }
    }

    fn add_entries(&mut self, i: usize, c: usize, zmat: &SimilarityMatrix) {
        for j in 0..self.z.len() {
            let l = self.z[j];
            if j != i && l != REMOVED {
                self.stat_add(c, l, zmat.z(i, j));
            }
        }
        if self.include_diagonal {
            self.stat_add(c, c, zmat.z(i, i));
        }
    }

    fn assign_existing(&mut self, i: usize, c: usize, zmat: &SimilarityMatrix) {
        self.add_entries(i, c, zmat);
        self.z[i] = c;
        self.counts[c] += 1;
    }

    /// Open cluster K for node i; its blocks toward every existing
    /// cluster come from the conjugate posterior given i's entries, the
    /// empty diagonal block from the prior.
    fn open_cluster<R: Rng>(
        &mut self,
        i: usize,
        zmat: &SimilarityMatrix,
        prior: &PriorConfig,
        rng: &mut R,
    ) {
        let k = self.k();
        let own = entry_stats(i, zmat, &self.z, k);
        grow_square(&mut self.u, 0.0);
        grow_square(&mut self.t, 0.0);
        grow_square(&mut self.stats, BlockStats::default());
        for (s, stat) in own.iter().enumerate() {
            let (u_new, t_new) = prior.block_prior(false).posterior(stat).sample(rng);
            self.u[k][s] = u_new;
            self.u[s][k] = u_new;
            self.t[k][s] = t_new;
            self.t[s][k] = t_new;
        }
        let own_diag = if self.include_diagonal {
            BlockStats::from_slice(&[zmat.z(i, i)])
        } else {
            BlockStats::default()
        };
        let (u_new, t_new) = prior.block_prior(true).posterior(&own_diag).sample(rng);
        self.u[k][k] = u_new;
        self.t[k][k] = t_new;
        self.add_entries(i, k, zmat);
        self.z[i] = k;
        self.counts.push(1);
    }
}

fn swap_square<T>(m: &mut [Vec<T>], a: usize, b: usize) {
    m.swap(a, b);
    for row in m.iter_mut() {
        row.swap(a, b);
    }
}

fn shrink_square<T>(m: &mut Vec<Vec<T>>) {
    m.pop();
    for row in m.iter_mut() {
        row.pop();
    }
}

fn grow_square<T: Clone>(m: &mut Vec<Vec<T>>, fill: T) {
    let k = m.len();
    for row in m.iter_mut() {
        row.push(fill.clone());
    }
    m.push(vec![fill; k + 1]);
}

fn sweep_in_place<R: Rng>(
    state: &mut Sweep,
    zmat: &SimilarityMatrix,
    graph: &NeighborhoodGraph,
    prior: &PriorConfig,
    vn: &LogVnTable,
    scoring: Scoring,
    rng: &mut R,
) {
    let n = state.z.len();
    for i in 0..n {
        state.remove(i, zmat);
        let weights = match scoring {
            Scoring::Collapsed => {
                label_weights_collapsed(i, zmat, &state.z, &state.stats, graph, prior, vn)
            }
            Scoring::Explicit => {
                label_weights(i, zmat, &state.z, &state.u, &state.t, graph, prior, vn)
            }
        };
        let choice = gumbel_argmax(&weights, rng);
        if choice == state.k() {
            state.open_cluster(i, zmat, prior, rng);
        } else {
            state.assign_existing(i, choice, zmat);
        }
    }
    let (u, t) = sample_blocks(zmat, &state.z, prior, rng);
    state.u = u;
    state.t = t;
}

/// One full Gibbs sweep from a valid state, returning the next state.
pub fn gibbs_sweep<R: Rng>(
    state: &ChainState,
    zmat: &SimilarityMatrix,
    graph: &NeighborhoodGraph,
    prior: &PriorConfig,
    vn: &LogVnTable,
    scoring: Scoring,
    rng: &mut R,
) -> ChainState {
    let mut z = state.z.clone();
    let k = compact_labels(&mut z);
    let mut counts = vec![0usize; k];
    for &l in &z {
        counts[l] += 1;
    }
    let mut sweep = Sweep::new(
        z,
        state.u.clone(),
        state.t.clone(),
        counts,
        zmat,
        prior.include_diagonal,
    );
    sweep_in_place(&mut sweep, zmat, graph, prior, vn, scoring, rng);
    ChainState {
        z: sweep.z,
        u: sweep.u,
        t: sweep.t,
        iteration: state.iteration + 1,
    }
}

/// Run a full chain and record every post-burn-in sweep.
pub fn run_chain(
    zmat: &SimilarityMatrix,
    graph: &NeighborhoodGraph,
    prior: &PriorConfig,
    opts: &ChainOptions,
) -> Result<ChainTrace> {
    prior.validate()?;
    let n = zmat.n();
    if graph.n() != n {
        return Err(Error::NodeSetMismatch(format!(
            "similarity matrix has {n} nodes, graph has {}",
            graph.n()
        )));
    }
    if n < 2 {
        return Err(Error::invalid("need at least 2 nodes"));
    }
    if opts.iterations == 0 || opts.burn_in >= opts.iterations {
        return Err(Error::invalid(format!(
            "iterations ({}) must exceed burn_in ({})",
            opts.iterations, opts.burn_in
        )));
    }

    let vn = log_vn_table(n, prior.gamma_dir, &prior.k_prior);
    let mut rng = rng_from(opts.seed);

    let mut z: Vec<usize> = match &opts.init {
        Init::RandomClusters(k) => {
            let k = (*k).clamp(1, n);
            (0..n).map(|_| rng.random_range(0..k)).collect()
        }
        Init::SingleCluster => vec![0; n],
        Init::Labels(labels) => {
            if labels.len() != n {
                return Err(Error::invalid("init labels length mismatch"));
            }
            labels.clone()
        }
    };
    let k = compact_labels(&mut z);
    let mut counts = vec![0usize; k];
    for &l in &z {
        counts[l] += 1;
    }
    let (u, t) = sample_blocks(zmat, &z, prior, &mut rng);
    let mut state = Sweep::new(z, u, t, counts, zmat, prior.include_diagonal);

    let retained = opts.iterations - opts.burn_in;
    let mut states = Vec::with_capacity(retained);
    let mut log_likelihoods = Vec::with_capacity(retained);
    for it in 1..=opts.iterations {
        sweep_in_place(&mut state, zmat, graph, prior, &vn, opts.scoring, &mut rng);
        if it > opts.burn_in {
            log_likelihoods.push(joint_log_likelihood(
                zmat,
                &state.z,
                &state.u,
                &state.t,
                prior.include_diagonal,
            ));
            states.push(ChainState {
                z: state.z.clone(),
                u: state.u.clone(),
                t: state.t.clone(),
                iteration: it,
            });
        }
    }
    Ok(ChainTrace {
        n,
        states,
        log_likelihoods,
        seed: opts.seed,
        prior: prior.clone(),
        iterations: opts.iterations,
        burn_in: opts.burn_in,
        neighbor_limit: graph.neighbor_limit,
    })
}
