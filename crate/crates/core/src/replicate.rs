//! End-to-end replication harness: simulate a design, compute curves +
//! similarities, cluster with each method, select λ by mDIC, and score
//! against the ground truth. Replicates run in parallel with seeds
//! derived per (replicate, method, λ), so any dispatch order reproduces
//! the same report.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designs::DesignSpec;
use crate::elastic::{similarity_matrix_with, srvf, AlignOptions, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::graph::neighborhoods;
use crate::income::{empirical_lorenz, gini, simulate_design, IncomeSample, LorenzCurve};
use crate::mfm::{run_chain, ChainOptions, PriorConfig, Scoring};
use crate::posterior::{
    adjusted_rand_index, dahl_summary, kmeans_baseline, mdic, MdicPenalty, PosteriorSummary,
};
use crate::seed::{derive_seed_labeled, f64_part};

/// Clustering methods compared in the replication study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MrfcMfm,
    Mfm,
    Kmeans,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::MrfcMfm => "mrfc-mfm",
            Method::Mfm => "mfm",
            Method::Kmeans => "kmeans",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mrfc-mfm" => Ok(Method::MrfcMfm),
            "mfm" => Ok(Method::Mfm),
            "kmeans" => Ok(Method::Kmeans),
            other => Err(Error::invalid(format!(
                "unknown method `{other}` (expected mrfc-mfm, mfm, kmeans)"
            ))),
        }
    }
}

/// Study settings; the defaults mirror the evaluation protocol
/// (10,000 observations per state, 500 sweeps, λ grid 0.5..3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationConfig {
    pub replicates: usize,
    pub n_obs: usize,
    pub grid_size: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub lambda_grid: Vec<f64>,
    pub kmeans_restarts: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub penalty: MdicPenalty,
    #[serde(skip, default)]
    pub align: AlignOptions,
}

impl Default for ReplicationConfig {
    fn default() -> Self {
        Self {
            replicates: 100,
            n_obs: 10_000,
            grid_size: 101,
            iterations: 500,
            burn_in: 250,
            lambda_grid: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            // the reference baseline is a single seeded start
            kmeans_restarts: 1,
            seed: 0,
            methods: vec![Method::MrfcMfm, Method::Mfm, Method::Kmeans],
            penalty: MdicPenalty::default(),
            align: AlignOptions::default(),
        }
    }
}

/// One method × λ result within one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub method: String,
    pub lambda: Option<f64>,
    pub k_hat: usize,
    pub ari: f64,
    pub mdic: Option<f64>,
    pub runtime_ms: u128,
    /// For λ-grid methods: whether this row is the replicate's mDIC
    /// argmin. Single-λ methods are trivially selected.
    pub selected: bool,
}

/// Seed for a replicate's data simulation.
pub fn data_seed(seed: u64, design_name: &str, replicate: usize) -> u64 {
    derive_seed_labeled(seed, design_name, &[0xDA7A, replicate as u64])
}

/// Seed for one chain within a replicate.
pub fn chain_seed(seed: u64, method: Method, replicate: usize, lambda: f64, limit: usize) -> u64 {
    derive_seed_labeled(
        seed,
        method.name(),
        &[replicate as u64, f64_part(lambda), limit as u64],
    )
}

/// Seed for the K-means baseline within a replicate.
pub fn kmeans_seed(seed: u64, replicate: usize) -> u64 {
    derive_seed_labeled(seed, "kmeans", &[replicate as u64])
}

struct ChainOutcome {
    summary: PosteriorSummary,
    runtime_ms: u128,
}

fn run_one_chain(
    zmat: &SimilarityMatrix,
    graph: &crate::graph::NeighborhoodGraph,
    prior: &PriorConfig,
    iterations: usize,
    burn_in: usize,
    seed: u64,
    penalty: MdicPenalty,
) -> Result<ChainOutcome> {
    let opts = ChainOptions {
        iterations,
        burn_in,
        init: Default::default(),
        seed,
        scoring: Scoring::default(),
    };
    let start = std::time::Instant::now();
    let trace = run_chain(zmat, graph, prior, &opts)?;
    let runtime_ms = start.elapsed().as_millis();
    let mut summary = dahl_summary(&trace)?;
    summary.mdic = Some(mdic(zmat, &trace, &summary, penalty)?);
    Ok(ChainOutcome {
        summary,
        runtime_ms,
    })
}

/// Run one replicate end to end, returning its rows in a deterministic
/// order (mrfc-mfm rows by λ, then mfm, then kmeans).
pub fn run_single_replicate(
    spec: &DesignSpec,
    cfg: &ReplicationConfig,
    replicate: usize,
) -> Result<Vec<ReplicateRow>> {
    let design = &spec.design;
    let samples = simulate_design(design, cfg.n_obs, data_seed(cfg.seed, &spec.name, replicate))?;
    let curves: Vec<LorenzCurve> = design
        .state_ids
        .iter()
        .map(|id| empirical_lorenz(&samples[id], cfg.grid_size))
        .collect::<Result<_>>()?;
    let zmat = similarity_matrix_with(&curves, &cfg.align)?;
    let graph = neighborhoods(
        design.state_ids.clone(),
        spec.edges.clone(),
        spec.neighbor_limit,
    )?;
    let truth: Vec<usize> = design.true_labels.iter().map(|l| l - 1).collect();
    let prior = PriorConfig::default_for(&zmat);

    let mut rows = Vec::new();
    let mut mrfc_k: Option<usize> = None;
    let mut mfm_k: Option<usize> = None;

    if cfg.methods.contains(&Method::MrfcMfm) {
        let mut lambda_rows = Vec::with_capacity(cfg.lambda_grid.len());
        for &lambda in &cfg.lambda_grid {
            let outcome = run_one_chain(
                &zmat,
                &graph,
                &prior.clone().with_lambda(lambda),
                cfg.iterations,
                cfg.burn_in,
                chain_seed(cfg.seed, Method::MrfcMfm, replicate, lambda, spec.neighbor_limit),
                cfg.penalty,
            )?;
            lambda_rows.push(ReplicateRow {
                replicate,
                method: Method::MrfcMfm.name().into(),
                lambda: Some(lambda),
                k_hat: outcome.summary.k_hat(),
                ari: adjusted_rand_index(&outcome.summary.z_hat, &truth)?,
                mdic: outcome.summary.mdic,
                runtime_ms: outcome.runtime_ms,
                selected: false,
            });
        }
        let best = lambda_rows
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.mdic
                    .unwrap()
                    .total_cmp(&b.mdic.unwrap())
                    .then(a.lambda.unwrap().total_cmp(&b.lambda.unwrap()))
            })
            .map(|(i, _)| i)
            .expect("nonempty lambda grid");
        lambda_rows[best].selected = true;
        mrfc_k = Some(lambda_rows[best].k_hat);
        rows.extend(lambda_rows);
    }

    if cfg.methods.contains(&Method::Mfm) {
        let outcome = run_one_chain(
            &zmat,
            &graph,
            &prior.clone().with_lambda(0.0),
            cfg.iterations,
            cfg.burn_in,
            chain_seed(cfg.seed, Method::Mfm, replicate, 0.0, spec.neighbor_limit),
            cfg.penalty,
        )?;
        mfm_k = Some(outcome.summary.k_hat());
        rows.push(ReplicateRow {
            replicate,
            method: Method::Mfm.name().into(),
            lambda: Some(0.0),
            k_hat: outcome.summary.k_hat(),
            ari: adjusted_rand_index(&outcome.summary.z_hat, &truth)?,
            mdic: outcome.summary.mdic,
            runtime_ms: outcome.runtime_ms,
            selected: true,
        });
    }

    if cfg.methods.contains(&Method::Kmeans) {
        // K-means cannot infer K; hand it the count inferred by the
        // selected Bayesian run (truth as a last resort).
        let k = mrfc_k.or(mfm_k).unwrap_or(spec.k_true);
        let srvfs: Vec<_> = curves.iter().map(srvf).collect::<Result<_>>()?;
        let start = std::time::Instant::now();
        let labels = kmeans_baseline(
            &srvfs,
            k,
            kmeans_seed(cfg.seed, replicate),
            cfg.kmeans_restarts,
        )?;
        rows.push(ReplicateRow {
            replicate,
            method: Method::Kmeans.name().into(),
            lambda: None,
            k_hat: k,
            ari: adjusted_rand_index(&labels, &truth)?,
            mdic: None,
            runtime_ms: start.elapsed().as_millis(),
            selected: true,
        });
    }
    Ok(rows)
}

/// Run the full study for one design; replicates in parallel, output
/// sorted by (replicate, method, λ).
pub fn run_design_replication(spec: &DesignSpec, cfg: &ReplicationConfig) -> Result<Vec<ReplicateRow>> {
    if cfg.replicates == 0 {
        return Err(Error::invalid("need at least 1 replicate"));
    }
    let mut rows: Vec<ReplicateRow> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_single_replicate(spec, cfg, r))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| {
        (a.replicate, &a.method, a.lambda.unwrap_or(-1.0))
            .partial_cmp(&(b.replicate, &b.method, b.lambda.unwrap_or(-1.0)))
            .unwrap()
    });
    Ok(rows)
}

/// Selected row per replicate for a method (λ-grid argmin rows).
pub fn selected_rows<'a>(rows: &'a [ReplicateRow], method: Method) -> Vec<&'a ReplicateRow> {
    rows.iter()
        .filter(|r| r.selected && r.method == method.name())
        .collect()
}

/// Histogram of inferred cluster counts per method (selected rows).
pub fn k_recovery_histogram(rows: &[ReplicateRow]) -> BTreeMap<(String, usize), usize> {
    let mut hist = BTreeMap::new();
    for row in rows.iter().filter(|r| r.selected) {
        *hist.entry((row.method.clone(), row.k_hat)).or_insert(0) += 1;
    }
    hist
}

/// How many selected rows of a method recovered exactly `k_true`.
pub fn k_recovery(rows: &[ReplicateRow], method: Method, k_true: usize) -> usize {
    selected_rows(rows, method)
        .iter()
        .filter(|r| r.k_hat == k_true)
        .count()
}

/// Mean ARI per method over selected rows.
pub fn mean_ari_by_method(rows: &[ReplicateRow]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.selected) {
        let e = sums.entry(row.method.clone()).or_insert((0.0, 0));
        e.0 += row.ari;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(m, (s, c))| (m, s / c as f64))
        .collect()
}

/// Mean mDIC-selected λ over replicates.
pub fn mean_selected_lambda(rows: &[ReplicateRow]) -> Option<f64> {
    let sel = selected_rows(rows, Method::MrfcMfm);
    if sel.is_empty() {
        return None;
    }
    Some(sel.iter().filter_map(|r| r.lambda).sum::<f64>() / sel.len() as f64)
}

/// Income statistics attached to a clustering of real-style data:
/// per-state Ginis, per-cluster mean Ginis, and the national Gini of the
/// pooled sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncomeStatistics {
    pub national_gini: f64,
    pub state_gini: Vec<(String, f64)>,
    /// Indexed by 0-based cluster label.
    pub cluster_mean_gini: Vec<f64>,
}

pub fn income_statistics(
    samples: &[IncomeSample],
    labels: &[usize],
    grid_size: usize,
) -> Result<IncomeStatistics> {
    if samples.len() != labels.len() {
        return Err(Error::invalid("one label per sample required"));
    }
    let mut state_gini = Vec::with_capacity(samples.len());
    for s in samples {
        state_gini.push((s.state_id.clone(), gini(&empirical_lorenz(s, grid_size)?)));
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut mean = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&l, (_, g)) in labels.iter().zip(&state_gini) {
        mean[l] += g;
        counts[l] += 1;
    }
    for (m, c) in mean.iter_mut().zip(&counts) {
        if *c > 0 {
            *m /= *c as f64;
        }
    }
    let pooled: Vec<f64> = samples.iter().flat_map(|s| s.values.iter().copied()).collect();
    let national = IncomeSample::new("national", pooled)?;
    let national_gini = gini(&empirical_lorenz(&national, grid_size)?);
    Ok(IncomeStatistics {
        national_gini,
        state_gini,
        cluster_mean_gini: mean,
    })
}
