//! Browser demo: simulate an income distribution and inspect its Lorenz
//! curve, align two curves elastically, and watch the spatial smoothing
//! parameter reshape a small clustering problem. Each export returns a
//! JSON string for the static page to plot.

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use lorenzmix::elastic::{elastic_inner_product_with, srvf, similarity_matrix_with, AlignOptions};
use lorenzmix::graph::neighborhoods;
use lorenzmix::income::{empirical_lorenz, gini, simulate_state, ClusterIncomeModel};
use lorenzmix::mfm::{run_chain, ChainOptions, PriorConfig};
use lorenzmix::posterior::dahl_summary;
use lorenzmix::seed::derive_seed;
use lorenzmix::Error;

fn model(shape: f64, scale: f64, noise_prob: f64, noise_shape: f64) -> ClusterIncomeModel {
    ClusterIncomeModel {
        gamma_shape: shape,
        gamma_scale: scale,
        noise_prob,
        noise_shape,
        noise_scale: scale,
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}"))
}

fn err_json(err: Error) -> String {
    to_json(&serde_json::json!({ "error": err.to_string() }))
}

#[derive(Serialize)]
struct CurveOut {
    p: Vec<f64>,
    share: Vec<f64>,
    gini: f64,
}

fn simulate_curve_inner(
    shape: f64,
    scale: f64,
    noise_prob: f64,
    noise_shape: f64,
    n_obs: usize,
    seed: u64,
    grid_size: usize,
) -> Result<CurveOut, Error> {
    let sample = simulate_state(&model(shape, scale, noise_prob, noise_shape), "demo", n_obs, seed)?;
    let curve = empirical_lorenz(&sample, grid_size)?;
    Ok(CurveOut {
        gini: gini(&curve),
        p: curve.grid,
        share: curve.share,
    })
}

/// Empirical Lorenz curve and Gini of a simulated income sample.
#[wasm_bindgen]
pub fn simulate_curve(
    shape: f64,
    scale: f64,
    noise_prob: f64,
    noise_shape: f64,
    n_obs: usize,
    seed: u64,
) -> String {
    match simulate_curve_inner(shape, scale, noise_prob, noise_shape, n_obs, seed, 101) {
        Ok(out) => to_json(&out),
        Err(e) => err_json(e),
    }
}

#[derive(Serialize)]
struct AlignOut {
    p: Vec<f64>,
    share1: Vec<f64>,
    share2: Vec<f64>,
    gini1: f64,
    gini2: f64,
    similarity: f64,
    z: f64,
    warp: Vec<f64>,
}

fn align_inner(shape1: f64, shape2: f64, n_obs: usize, seed: u64) -> Result<AlignOut, Error> {
    let grid_size = 101;
    let m1 = model(shape1, 50_000.0, 0.05, 0.4);
    let m2 = model(shape2, 50_000.0, 0.05, 0.4);
    let s1 = simulate_state(&m1, "a", n_obs, derive_seed(seed, &[1]))?;
    let s2 = simulate_state(&m2, "b", n_obs, derive_seed(seed, &[2]))?;
    let c1 = empirical_lorenz(&s1, grid_size)?;
    let c2 = empirical_lorenz(&s2, grid_size)?;
    let q1 = srvf(&c1)?;
    let q2 = srvf(&c2)?;
    let (value, warp) = elastic_inner_product_with(&q1, &q2, &AlignOptions::default())?;
    Ok(AlignOut {
        p: c1.grid.clone(),
        gini1: gini(&c1),
        gini2: gini(&c2),
        share1: c1.share,
        share2: c2.share,
        similarity: value,
        z: lorenzmix::elastic::fisher_z(value),
        warp: warp.values,
    })
}

/// Align two simulated states' Lorenz curves; returns both curves, the
/// elastic similarity, its Fisher Z, and the optimal warp.
#[wasm_bindgen]
pub fn align_curves(shape1: f64, shape2: f64, n_obs: usize, seed: u64) -> String {
    match align_inner(shape1, shape2, n_obs, seed) {
        Ok(out) => to_json(&out),
        Err(e) => err_json(e),
    }
}

#[derive(Serialize)]
struct MapOut {
    rows: usize,
    cols: usize,
    truth: Vec<usize>,
    found: Vec<usize>,
    k_hat: usize,
    lambda: f64,
}

/// 4×5 map with three true clusters (one split into two regions).
const DEMO_TRUTH: [usize; 20] = [
    0, 0, 1, 1, 1, //
    0, 0, 1, 1, 1, //
    2, 2, 2, 0, 0, //
    2, 2, 2, 0, 0,
];

fn cluster_demo_inner(lambda: f64, n_obs: usize, seed: u64, iterations: usize) -> Result<MapOut, Error> {
    let (rows, cols) = (4usize, 5usize);
    let shapes = [1.05, 1.25, 1.45];
    let curves: Vec<_> = DEMO_TRUTH
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let m = model(shapes[c], 50_000.0, 0.05, 0.4);
            let sample = simulate_state(&m, format!("n{i}"), n_obs, derive_seed(seed, &[i as u64]))?;
            empirical_lorenz(&sample, 101)
        })
        .collect::<Result<_, _>>()?;
    let zmat = similarity_matrix_with(&curves, &AlignOptions::default())?;

    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
        }
    }
    let ids: Vec<String> = (0..rows * cols).map(|i| format!("n{i}")).collect();
    let graph = neighborhoods(ids, edges, 1)?;
    let prior = PriorConfig::default_for(&zmat).with_lambda(lambda);
    let opts = ChainOptions {
        iterations: iterations.max(2),
        burn_in: iterations.max(2) / 2,
        init: Default::default(),
        seed: derive_seed(seed, &[99]),
        scoring: Default::default(),
    };
    let trace = run_chain(&zmat, &graph, &prior, &opts)?;
    let summary = dahl_summary(&trace)?;
    Ok(MapOut {
        rows,
        cols,
        truth: DEMO_TRUTH.to_vec(),
        found: summary.z_hat.clone(),
        k_hat: summary.k_hat(),
        lambda,
    })
}

/// Cluster the demo map at a given spatial smoothness λ.
#[wasm_bindgen]
pub fn cluster_demo(lambda: f64, n_obs: usize, seed: u64, iterations: usize) -> String {
    match cluster_demo_inner(lambda, n_obs, seed, iterations) {
        Ok(out) => to_json(&out),
        Err(e) => err_json(e),
    }
}
