//! Elastic shape similarity for Lorenz curves.
//!
//! Curves are represented by their square-root velocity function
//! q = sign(f′)·√|f′|, under which reparameterization acts by isometries
//! and the similarity of two curves is the inner product ⟨q1, (q2, γ)⟩
//! maximized over warping functions γ. The maximization is a dynamic
//! program over monotone lattice paths. Curves here are scalar, so the
//! rotation group is trivial and is not optimized over (an optional sign
//! flip stands in for the reflection group).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::income::LorenzCurve;
use crate::math::trapezoid;

/// Clip applied to similarities before the Fisher Z-transform, keeping
/// the transform finite for (near-)identical curves.
pub const FISHER_CLIP_EPS: f64 = 1e-8;

/// Square-root velocity representation on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Srvf {
    pub grid: Vec<f64>,
    pub q: Vec<f64>,
}

impl Srvf {
    /// Discrete squared L2 norm, trapezoidal rule.
    pub fn norm_sq(&self) -> f64 {
        let sq: Vec<f64> = self.q.iter().map(|v| v * v).collect();
        trapezoid(&self.grid, &sq)
    }
}

/// Discrete orientation-preserving reparameterization of [0, 1]:
/// strictly increasing with fixed endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpingFunction {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl WarpingFunction {
    pub fn identity(grid: Vec<f64>) -> Self {
        let values = grid.clone();
        Self { grid, values }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.len() != self.values.len() || self.grid.len() < 2 {
            return Err(Error::invalid("warp needs >= 2 aligned points"));
        }
        if self.values[0] != 0.0 || (self.values.last().unwrap() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("warp must fix the endpoints"));
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("warp must be strictly increasing"));
        }
        Ok(())
    }
}

/// Knobs for the alignment search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    /// Largest step component in the lattice neighborhood; slopes range
    /// over the coprime fractions a/b with a, b ≤ step_bound. Setting it
    /// to the grid size makes the search exhaustive over all monotone
    /// lattice paths.
    pub step_bound: usize,
    /// Also try the sign-flipped second curve and keep the better value
    /// (the reflection part of the orthogonal group; off by default).
    pub allow_reflection: bool,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            step_bound: 5,
            allow_reflection: false,
        }
    }
}

/// Pairwise elastic similarities S and their Fisher Z-transform.
///
/// Both matrices are symmetric with the diagonal of S pinned to 1; only
/// the strict upper triangle of Z is modeled downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    s: Vec<f64>,
    z: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn s(&self, i: usize, j: usize) -> f64 {
        self.s[i * self.n + j]
    }

    #[inline]
    pub fn z(&self, i: usize, j: usize) -> f64 {
        self.z[i * self.n + j]
    }

    pub fn s_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.s[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    pub fn z_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.z[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    /// Rebuild from a stored S matrix; Z is recomputed from clipped S.
    pub fn from_s_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("similarity matrix must be square, n >= 2"));
        }
        let mut s = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() || v.abs() > 1.0 + 1e-9 {
                    return Err(Error::invalid(format!("S[{i}][{j}] = {v} outside [-1, 1]")));
                }
                s[i * n + j] = v.clamp(-1.0, 1.0);
            }
        }
        for i in 0..n {
            for j in 0..i {
                if (s[i * n + j] - s[j * n + i]).abs() > 1e-9 {
                    return Err(Error::invalid(format!("S not symmetric at ({i}, {j})")));
                }
            }
        }
        let z = s.iter().map(|&v| fisher_z(v)).collect();
        Ok(Self { n, s, z })
    }

    /// Build from a Z matrix directly (synthetic inputs); S = tanh(Z/2)
    /// off the diagonal and 1 on it.
    pub fn from_z_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("similarity matrix must be square, n >= 2"));
        }
        let mut z = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("Z[{i}][{j}] not finite")));
                }
                z[i * n + j] = *v;
            }
        }
        for i in 0..n {
            for j in 0..i {
                if (z[i * n + j] - z[j * n + i]).abs() > 1e-9 {
                    return Err(Error::invalid(format!("Z not symmetric at ({i}, {j})")));
                }
            }
        }
        let mut s = vec![1.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s[i * n + j] = (z[i * n + j] / 2.0).tanh();
                }
            }
        }
        Ok(Self { n, s, z })
    }
}

/// Fisher Z-transform log((1+s)/(1−s)) of a clipped similarity.
/// Clipped inputs map to exactly log((2−ε)/ε) and its negative.
pub fn fisher_z(s: f64) -> f64 {
    let eps = FISHER_CLIP_EPS;
    if s >= 1.0 - eps {
        ((2.0 - eps) / eps).ln()
    } else if s <= -1.0 + eps {
        (eps / (2.0 - eps)).ln()
    } else {
        ((1.0 + s) / (1.0 - s)).ln()
    }
}

/// SRVF of a curve sampled on a uniform grid: central differences in the
/// interior, one-sided at the endpoints.
pub fn srvf(curve: &LorenzCurve) -> Result<Srvf> {
    let m = curve.len();
    if m < 3 {
        return Err(Error::GridMismatch("srvf needs at least 3 grid points".into()));
    }
    let h = 1.0 / (m - 1) as f64;
    for (i, p) in curve.grid.iter().enumerate() {
        if (p - i as f64 * h).abs() > 1e-9 {
            return Err(Error::GridMismatch("srvf requires a uniform grid".into()));
        }
    }
    let f = &curve.share;
    let mut q = Vec::with_capacity(m);
    for i in 0..m {
        let d = if i == 0 {
            (f[1] - f[0]) / h
        } else if i == m - 1 {
            (f[m - 1] - f[m - 2]) / h
        } else {
            (f[i + 1] - f[i - 1]) / (2.0 * h)
        };
        q.push(d.signum() * d.abs().sqrt());
    }
    Ok(Srvf {
        grid: curve.grid.clone(),
        q,
    })
}

/// All coprime step offsets (di, dj) with components in 1..=bound,
/// the unit diagonal first so ties resolve toward the identity warp.
fn coprime_steps(bound: usize) -> Vec<(usize, usize)> {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    let mut steps = vec![(1usize, 1usize)];
    for a in 1..=bound {
        for b in 1..=bound {
            if (a, b) != (1, 1) && gcd(a, b) == 1 {
                steps.push((a, b));
            }
        }
    }
    steps
}

#[inline]
fn interp(q: &[f64], x: f64) -> f64 {
    let m = q.len();
    if x <= 0.0 {
        return q[0];
    }
    let k = x.floor() as usize;
    if k >= m - 1 {
        return q[m - 1];
    }
    let frac = x - k as f64;
    q[k] + frac * (q[k + 1] - q[k])
}

/// Trapezoidal energy of the straight lattice segment (i0, j0) → (i1, j1):
/// ∫ q1(t) q2(γ(t)) √γ′(t) dt along the segment, with γ linear on it.
#[inline]
fn edge_energy(q1: &[f64], q2: &[f64], i0: usize, j0: usize, i1: usize, j1: usize, h: f64) -> f64 {
    let slope = (j1 - j0) as f64 / (i1 - i0) as f64;
    let root = slope.sqrt();
    let mut acc = 0.5 * q1[i0] * q2[j0];
    for t in (i0 + 1)..i1 {
        let y = j0 as f64 + slope * (t - i0) as f64;
        acc += q1[t] * interp(q2, y);
    }
    acc += 0.5 * q1[i1] * q2[j1];
    acc * root * h
}

/// Same quadrature weights applied to ∫ q2(γ(t))² γ′(t) dt: the squared
/// norm of the warped curve along the segment. The pairing with
/// `edge_energy` keeps the discrete value Cauchy-Schwarz bounded after
/// renormalization.
#[inline]
fn edge_norm_sq(q2: &[f64], i0: usize, j0: usize, i1: usize, j1: usize, h: f64) -> f64 {
    let slope = (j1 - j0) as f64 / (i1 - i0) as f64;
    let q_start = interp(q2, j0 as f64);
    let q_end = interp(q2, j1 as f64);
    let mut acc = 0.5 * q_start * q_start;
    for t in (i0 + 1)..i1 {
        let y = j0 as f64 + slope * (t - i0) as f64;
        let v = interp(q2, y);
        acc += v * v;
    }
    acc += 0.5 * q_end * q_end;
    acc * slope * h
}

fn dp_align(q1: &[f64], q2: &[f64], steps: &[(usize, usize)]) -> (f64, Vec<(usize, usize)>) {
    let m = q1.len();
    let h = 1.0 / (m - 1) as f64;
    let mut best = vec![f64::NEG_INFINITY; m * m];
    let mut pred = vec![usize::MAX; m * m];
    best[0] = 0.0;
    for i in 1..m {
        for j in 1..m {
            let mut b = f64::NEG_INFINITY;
            let mut p = usize::MAX;
            for &(di, dj) in steps {
                if di > i || dj > j {
                    continue;
                }
                let (pi, pj) = (i - di, j - dj);
                let prev = best[pi * m + pj];
                if prev == f64::NEG_INFINITY {
                    continue;
                }
                let cand = prev + edge_energy(q1, q2, pi, pj, i, j, h);
                if cand > b {
                    b = cand;
                    p = pi * m + pj;
                }
            }
            best[i * m + j] = b;
            pred[i * m + j] = p;
        }
    }
    // walk back from the corner
    let mut path = Vec::new();
    let mut node = (m - 1) * m + (m - 1);
    while node != usize::MAX {
        path.push((node / m, node % m));
        node = if node == 0 { usize::MAX } else { pred[node] };
    }
    path.reverse();

    // renormalize by the warped curve's own discrete norm along the
    // optimal path; the shared quadrature weights bound the result by 1
    let mut norm_sq = 0.0;
    for w in path.windows(2) {
        norm_sq += edge_norm_sq(q2, w[0].0, w[0].1, w[1].0, w[1].1, h);
    }
    let raw = best[(m - 1) * m + (m - 1)];
    let value = if norm_sq > 0.0 { raw / norm_sq.sqrt() } else { raw };
    (value, path)
}

fn warp_from_path(path: &[(usize, usize)], grid: &[f64]) -> WarpingFunction {
    let m = grid.len();
    let h = 1.0 / (m - 1) as f64;
    let mut values = vec![0.0; m];
    for w in path.windows(2) {
        let (i0, j0) = w[0];
        let (i1, j1) = w[1];
        let slope = (j1 - j0) as f64 / (i1 - i0) as f64;
        for t in i0..=i1 {
            values[t] = (j0 as f64 + slope * (t - i0) as f64) * h;
        }
    }
    values[0] = 0.0;
    values[m - 1] = 1.0;
    WarpingFunction {
        grid: grid.to_vec(),
        values,
    }
}

/// Elastic inner product of two SRVFs with the default search options.
pub fn elastic_inner_product(q1: &Srvf, q2: &Srvf) -> Result<(f64, WarpingFunction)> {
    elastic_inner_product_with(q1, q2, &AlignOptions::default())
}

/// Elastic inner product: max over discretized warps of
/// ∫ q1(t) q2(γ(t)) √γ′(t) dt, q2 warped toward q1. Both inputs are
/// normalized to unit discrete norm first and the value is clamped to
/// [−1, 1], so the self inner product is exactly 1.
pub fn elastic_inner_product_with(
    q1: &Srvf,
    q2: &Srvf,
    opts: &AlignOptions,
) -> Result<(f64, WarpingFunction)> {
    let m = q1.q.len();
    if q2.q.len() != m {
        return Err(Error::GridMismatch(format!(
            "srvf grids differ: {m} vs {}",
            q2.q.len()
        )));
    }
    if m < 2 {
        return Err(Error::GridMismatch("srvf grid too small".into()));
    }
    let n1 = q1.norm_sq().sqrt();
    let n2 = q2.norm_sq().sqrt();
    if n1 <= 0.0 || n2 <= 0.0 {
        return Err(Error::invalid("srvf with zero norm cannot be aligned"));
    }
    let a: Vec<f64> = q1.q.iter().map(|v| v / n1).collect();
    let b: Vec<f64> = q2.q.iter().map(|v| v / n2).collect();

    let bound = opts.step_bound.clamp(1, m - 1);
    let steps = coprime_steps(bound);
    let (mut value, mut path) = dp_align(&a, &b, &steps);
    if opts.allow_reflection {
        let neg: Vec<f64> = b.iter().map(|v| -v).collect();
        let (v_neg, p_neg) = dp_align(&a, &neg, &steps);
        if v_neg > value {
            value = v_neg;
            path = p_neg;
        }
    }
    Ok((value.clamp(-1.0, 1.0), warp_from_path(&path, &q1.grid)))
}

/// Pairwise similarity matrix over curves sharing a common grid, with
/// the default alignment options.
pub fn similarity_matrix(curves: &[LorenzCurve]) -> Result<SimilarityMatrix> {
    similarity_matrix_with(curves, &AlignOptions::default())
}

/// Pairwise similarity matrix: each unordered pair aligned once (in
/// parallel; the result does not depend on scheduling), diagonal pinned
/// to 1, Z the Fisher transform of clipped S.
pub fn similarity_matrix_with(
    curves: &[LorenzCurve],
    opts: &AlignOptions,
) -> Result<SimilarityMatrix> {
    let n = curves.len();
    if n < 2 {
        return Err(Error::invalid("similarity matrix needs at least 2 curves"));
    }
    let m = curves[0].len();
    for c in curves {
        if c.len() != m {
            return Err(Error::GridMismatch(
                "curves must share a common grid".into(),
            ));
        }
        for (a, b) in c.grid.iter().zip(&curves[0].grid) {
            if (a - b).abs() > 1e-12 {
                return Err(Error::GridMismatch(
                    "curves must share a common grid".into(),
                ));
            }
        }
    }
    let srvfs: Vec<Srvf> = curves.iter().map(srvf).collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let values: Vec<(usize, usize, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (v, _) = elastic_inner_product_with(&srvfs[i], &srvfs[j], opts)?;
            Ok((i, j, v))
        })
        .collect::<Result<_>>()?;

    let mut s = vec![1.0; n * n];
    for (i, j, v) in values {
        s[i * n + j] = v;
        s[j * n + i] = v;
    }
    let z = s.iter().map(|&v| fisher_z(v)).collect();
    Ok(SimilarityMatrix { n, s, z })
}
