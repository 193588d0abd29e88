//! Statistical invariants of the sampler that need real chains rather
//! than unit fixtures: exhaustive-enumeration equivalence at n = 5,
//! exchangeability under node relabeling, the monotone effect of the
//! smoothness parameter, and scoring-variant agreement.

mod support;

use std::collections::BTreeMap;

use lorenzmix::designs::{builtin_design, Signal};
use lorenzmix::elastic::{similarity_matrix_with, AlignOptions, SimilarityMatrix};
use lorenzmix::graph::{neighborhoods, us_state_graph};
use lorenzmix::income::{empirical_lorenz, simulate_design};
use lorenzmix::mfm::{run_chain, ChainOptions, PriorConfig, Scoring};
use lorenzmix::replicate::{chain_seed, data_seed, Method};
use lorenzmix::seed::derive_seed;

use support::{canonical, tv_distance, OracleModel};

fn empirical_partition_distribution(
    z: &SimilarityMatrix,
    graph: &lorenzmix::graph::NeighborhoodGraph,
    prior: &PriorConfig,
    sweeps: usize,
    seed: u64,
    scoring: Scoring,
) -> BTreeMap<Vec<usize>, f64> {
    let opts = ChainOptions {
        iterations: sweeps + 500,
        burn_in: 500,
        init: Default::default(),
        seed,
        scoring,
    };
    let trace = run_chain(z, graph, prior, &opts).unwrap();
    let mut empirical = BTreeMap::new();
    let weight = 1.0 / trace.len() as f64;
    for state in &trace.states {
        *empirical.entry(canonical(&state.z)).or_insert(0.0) += weight;
    }
    empirical
}

fn five_node_fixture() -> (SimilarityMatrix, Vec<(usize, usize)>) {
    // clusters {0,1,2} and {3,4} on a path graph
    let z = SimilarityMatrix::from_z_rows(vec![
        vec![0.0, 2.2, 1.9, 0.5, 0.3],
        vec![2.2, 0.0, 2.0, 0.6, 0.4],
        vec![1.9, 2.0, 0.0, 0.2, 0.6],
        vec![0.5, 0.6, 0.2, 0.0, 2.3],
        vec![0.3, 0.4, 0.6, 2.3, 0.0],
    ])
    .unwrap();
    let edges = vec![(0, 1), (1, 2), (2, 3), (3, 4)];
    (z, edges)
}

#[test]
fn five_node_posterior_matches_enumeration_for_both_scorings() {
    let (z, edges) = five_node_fixture();
    let ids: Vec<String> = (0..5).map(|i| i.to_string()).collect();
    let graph = neighborhoods(ids, edges.clone(), 1).unwrap();
    let prior = PriorConfig::default_for(&z).with_lambda(0.5);
    let oracle = OracleModel {
        gamma: prior.gamma_dir,
        alpha: prior.alpha,
        beta: prior.beta,
        k0: prior.k0,
        mu0_diag: prior.mu0_diag,
        mu0_offdiag: prior.mu0_offdiag,
        lambda: prior.lambda,
        neighbor_pairs: edges,
    }
    .posterior(&z);
    assert_eq!(oracle.len(), 52, "Bell(5) partitions");

    for (scoring, seed) in [(Scoring::Collapsed, 21), (Scoring::Explicit, 22)] {
        let empirical = empirical_partition_distribution(&z, &graph, &prior, 50_000, seed, scoring);
        let tv = tv_distance(&empirical, &oracle);
        assert!(tv <= 0.05, "{scoring:?}: TV {tv:.4} over 52 partitions");
    }
}

#[test]
fn posterior_is_exchangeable_under_node_relabeling() {
    // a fixed-scan sweep cannot be pathwise equivariant, but its
    // stationary distribution must be: the permuted problem's partition
    // posterior equals the permuted posterior
    let (z, edges) = five_node_fixture();
    let perm = [3usize, 0, 4, 2, 1]; // node i of the original becomes perm[i]
    let rows = z.z_rows();
    let mut permuted = vec![vec![0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            permuted[perm[i]][perm[j]] = rows[i][j];
        }
    }
    let z_perm = SimilarityMatrix::from_z_rows(permuted).unwrap();
    let edges_perm: Vec<(usize, usize)> = edges
        .iter()
        .map(|&(a, b)| (perm[a].min(perm[b]), perm[a].max(perm[b])))
        .collect();

    let ids: Vec<String> = (0..5).map(|i| i.to_string()).collect();
    let graph = neighborhoods(ids.clone(), edges, 1).unwrap();
    let graph_perm = neighborhoods(ids, edges_perm, 1).unwrap();
    let prior = PriorConfig::default_for(&z).with_lambda(0.7);
    let prior_perm = PriorConfig::default_for(&z_perm).with_lambda(0.7);

    let direct =
        empirical_partition_distribution(&z, &graph, &prior, 60_000, 5, Scoring::Collapsed);
    let permuted_dist = empirical_partition_distribution(
        &z_perm,
        &graph_perm,
        &prior_perm,
        60_000,
        6,
        Scoring::Collapsed,
    );

    // push the direct distribution through the permutation
    let mut pushed: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (labels, p) in direct {
        let mut relabeled = vec![0usize; 5];
        for (i, &l) in labels.iter().enumerate() {
            relabeled[perm[i]] = l;
        }
        *pushed.entry(canonical(&relabeled)).or_insert(0.0) += p;
    }
    let mut tv = 0.0;
    for (labels, p) in &pushed {
        tv += (p - permuted_dist.get(labels).copied().unwrap_or(0.0)).abs();
    }
    for (labels, p) in &permuted_dist {
        if !pushed.contains_key(labels) {
            tv += p;
        }
    }
    tv /= 2.0;
    assert!(tv <= 0.05, "exchangeability TV {tv:.4}");
}

#[test]
fn mean_cluster_count_is_monotone_in_lambda() {
    // over 20 seeded design-1 runs, the mean posterior number of
    // clusters must not increase as lambda rises through {0, 1, 2, 3}
    let spec = builtin_design(1, Signal::Strong);
    let design = &spec.design;
    let lambdas = [0.0, 1.0, 2.0, 3.0];
    let mut means = [0.0f64; 4];
    let runs = 20;
    for rep in 0..runs {
        let samples = simulate_design(design, 2_000, data_seed(606, &spec.name, rep)).unwrap();
        let curves: Vec<_> = design
            .state_ids
            .iter()
            .map(|id| empirical_lorenz(&samples[id], 51).unwrap())
            .collect();
        let zmat = similarity_matrix_with(&curves, &AlignOptions::default()).unwrap();
        let graph = us_state_graph(&design.state_ids, spec.neighbor_limit).unwrap();
        let prior = PriorConfig::default_for(&zmat);
        for (slot, &lambda) in lambdas.iter().enumerate() {
            let opts = ChainOptions {
                iterations: 300,
                burn_in: 150,
                init: Default::default(),
                seed: chain_seed(606, Method::MrfcMfm, rep, lambda, spec.neighbor_limit),
                scoring: Scoring::default(),
            };
            let trace = run_chain(&zmat, &graph, &prior.clone().with_lambda(lambda), &opts).unwrap();
            let mean_k: f64 =
                trace.states.iter().map(|s| s.k() as f64).sum::<f64>() / trace.len() as f64;
            means[slot] += mean_k / runs as f64;
        }
    }
    for w in means.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-9,
            "mean K rose with lambda: {means:?}"
        );
    }
}

#[test]
fn scoring_variants_agree_on_the_posterior() {
    // collapsed and explicit scoring target the same distribution
    let (z, edges) = five_node_fixture();
    let ids: Vec<String> = (0..5).map(|i| i.to_string()).collect();
    let graph = neighborhoods(ids, edges, 1).unwrap();
    let prior = PriorConfig::default_for(&z);
    let a = empirical_partition_distribution(&z, &graph, &prior, 40_000, derive_seed(1, &[1]), Scoring::Collapsed);
    let b = empirical_partition_distribution(&z, &graph, &prior, 40_000, derive_seed(1, &[2]), Scoring::Explicit);
    let mut tv = 0.0;
    for (labels, p) in &a {
        tv += (p - b.get(labels).copied().unwrap_or(0.0)).abs();
    }
    for (labels, p) in &b {
        if !a.contains_key(labels) {
            tv += p;
        }
    }
    tv /= 2.0;
    assert!(tv <= 0.05, "scoring variants disagree: TV {tv:.4}");
}
