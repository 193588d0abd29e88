//! Shared oracles for the integration suites, implemented independently
//! of the library's code paths: exact set-partition enumeration of the
//! posterior, direct-summation V_n coefficients, half-integer log-gamma,
//! and a recursive exhaustive alignment search.

use lorenzmix::elastic::SimilarityMatrix;

/// ln Γ(x) for x = k/2 (positive half-integers), built from the exact
/// recursion instead of a series approximation.
pub fn ln_gamma_half(two_x: u64) -> f64 {
    assert!(two_x >= 1);
    if two_x % 2 == 0 {
        // integer argument: ln (n-1)!
        let n = two_x / 2;
        (1..n).map(|i| (i as f64).ln()).sum()
    } else {
        // Γ(1/2) = √π, Γ(x+1) = xΓ(x)
        let mut acc = 0.5 * std::f64::consts::PI.ln();
        let mut x = 0.5f64;
        while (2.0 * x).round() as u64 != two_x {
            acc += x.ln();
            x += 1.0;
        }
        acc
    }
}

/// Truncated-Poisson(1) p.m.f. on {1, 2, ...} via plain arithmetic.
pub fn trunc_poisson1_pmf(k: usize) -> f64 {
    let mut factorial = 1.0;
    for i in 1..=k {
        factorial *= i as f64;
    }
    let e = std::f64::consts::E;
    (1.0 / e) / factorial / (1.0 - 1.0 / e)
}

/// V_n(w) by direct summation with integer factor products.
pub fn vn_direct(n: usize, w: usize, gamma: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..=400usize {
        let p = trunc_poisson1_pmf(k);
        let mut falling = 1.0;
        for t in 0..w {
            falling *= k as f64 - t as f64;
        }
        if falling <= 0.0 {
            continue;
        }
        let mut rising = 1.0;
        for t in 0..n {
            rising *= gamma * k as f64 + t as f64;
        }
        total += p * falling / rising;
    }
    total
}

/// All set partitions of {0..n-1} as canonical restricted-growth labels.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let max = prefix.iter().copied().max().map_or(0, |m| m + 1);
        for label in 0..=max {
            prefix.push(label);
            extend(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), n, &mut out);
    out
}

/// Canonical form of arbitrary labels (first-appearance order).
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = vec![None; labels.len() + 1];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| match map[l] {
            Some(c) => c,
            None => {
                let c = next;
                map[l] = Some(c);
                next += 1;
                c
            }
        })
        .collect()
}

/// Normal-Gamma marginal likelihood of a block's entries, written from
/// the compound-distribution formula with half-integer log-gammas
/// (valid for integer alpha and alpha + m/2).
pub fn ng_log_marginal(xs: &[f64], mu0: f64, k0: f64, alpha: f64, beta: f64) -> f64 {
    let m = xs.len();
    if m == 0 {
        return 0.0;
    }
    let mf = m as f64;
    let mean = xs.iter().sum::<f64>() / mf;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let k_n = k0 + mf;
    let alpha_n = alpha + mf / 2.0;
    let beta_n = beta + 0.5 * ss + k0 * mf * (mean - mu0) * (mean - mu0) / (2.0 * k_n);
    ln_gamma_half((2.0 * alpha_n).round() as u64) - ln_gamma_half((2.0 * alpha).round() as u64)
        + alpha * beta.ln()
        - alpha_n * beta_n.ln()
        + 0.5 * (k0.ln() - k_n.ln())
        - 0.5 * mf * (2.0 * std::f64::consts::PI).ln()
}

pub struct OracleModel {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k0: f64,
    pub mu0_diag: f64,
    pub mu0_offdiag: f64,
    pub lambda: f64,
    /// Unordered pairs (i, j), i < j, with graph distance within the limit.
    pub neighbor_pairs: Vec<(usize, usize)>,
}

impl OracleModel {
    /// Unnormalized log posterior of one labeling: MFM partition prior ×
    /// MRF joint factor × conjugate marginal likelihood.
    pub fn log_weight(&self, labels: &[usize], zmat: &SimilarityMatrix) -> f64 {
        let n = labels.len();
        let k = labels.iter().copied().max().unwrap() + 1;

        // p(partition) = V_n(K) · Π_c γ^(|c|), rising factorial
        let mut log_prior = vn_direct(n, k, self.gamma).ln();
        for c in 0..k {
            let size = labels.iter().filter(|&&l| l == c).count();
            for t in 0..size {
                log_prior += (self.gamma + t as f64).ln();
            }
        }

        // MRF joint: exp(λ · #{neighbor pairs sharing a label})
        let same = self
            .neighbor_pairs
            .iter()
            .filter(|(i, j)| labels[*i] == labels[*j])
            .count();
        let log_mrf = self.lambda * same as f64;

        // blockwise conjugate marginals over the strict upper triangle
        let mut log_lik = 0.0;
        for r in 0..k {
            for s in r..k {
                let entries: Vec<f64> = (0..n)
                    .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| {
                        (labels[i].min(labels[j]), labels[i].max(labels[j])) == (r, s)
                    })
                    .map(|(i, j)| zmat.z(i, j))
                    .collect();
                let mu0 = if r == s { self.mu0_diag } else { self.mu0_offdiag };
                log_lik += ng_log_marginal(&entries, mu0, self.k0, self.alpha, self.beta);
            }
        }
        log_prior + log_mrf + log_lik
    }

    /// Exact posterior over all set partitions.
    pub fn posterior(&self, zmat: &SimilarityMatrix) -> Vec<(Vec<usize>, f64)> {
        let parts = set_partitions(zmat.n());
        let weights: Vec<f64> = parts.iter().map(|p| self.log_weight(p, zmat)).collect();
        let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = weights.iter().map(|w| (w - max).exp()).sum();
        parts
            .into_iter()
            .zip(weights)
            .map(|(p, w)| (p, (w - max).exp() / total))
            .collect()
    }
}

/// Total variation distance between an empirical partition distribution
/// and the oracle posterior.
pub fn tv_distance(empirical: &std::collections::BTreeMap<Vec<usize>, f64>, oracle: &[(Vec<usize>, f64)]) -> f64 {
    let mut tv = 0.0;
    for (labels, p) in oracle {
        let q = empirical.get(labels).copied().unwrap_or(0.0);
        tv += (p - q).abs();
    }
    // mass the empirical puts on partitions the oracle enumerated is all
    // of it (the oracle covers the whole space), so the sum is complete
    tv / 2.0
}

pub mod align_oracle {
    use lorenzmix::elastic::Srvf;

    fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
        (1..x.len())
            .map(|i| 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]))
            .sum()
    }

    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }

    fn sample(q: &[f64], y: f64) -> f64 {
        let k = y.floor() as usize;
        if k >= q.len() - 1 {
            return q[q.len() - 1];
        }
        q[k] + (y - k as f64) * (q[k + 1] - q[k])
    }

    fn segment(q1: &[f64], q2: &[f64], i0: usize, j0: usize, i1: usize, j1: usize) -> (f64, f64) {
        let h = 1.0 / (q1.len() - 1) as f64;
        let slope = (j1 - j0) as f64 / (i1 - i0) as f64;
        let mut value = 0.5 * q1[i0] * sample(q2, j0 as f64);
        let mut norm = 0.5 * sample(q2, j0 as f64).powi(2);
        for t in (i0 + 1)..i1 {
            let y = j0 as f64 + slope * (t - i0) as f64;
            let v = sample(q2, y);
            value += q1[t] * v;
            norm += v * v;
        }
        value += 0.5 * q1[i1] * sample(q2, j1 as f64);
        norm += 0.5 * sample(q2, j1 as f64).powi(2);
        (value * slope.sqrt() * h, norm * slope * h)
    }

    fn explore(
        q1: &[f64],
        q2: &[f64],
        i: usize,
        j: usize,
        acc: f64,
        acc_norm: f64,
        best: &mut (f64, f64),
    ) {
        let m = q1.len();
        if i == m - 1 && j == m - 1 {
            if acc > best.0 {
                *best = (acc, acc_norm);
            }
            return;
        }
        for di in 1..m - i {
            for dj in 1..m - j {
                if gcd(di, dj) != 1 {
                    continue;
                }
                let (v, nn) = segment(q1, q2, i, j, i + di, j + dj);
                explore(q1, q2, i + di, j + dj, acc + v, acc_norm + nn, best);
            }
        }
    }

    /// Max of the raw warped inner product over all monotone lattice
    /// paths, renormalized by the winning path's warped norm.
    pub fn exhaustive_best(q1: &Srvf, q2: &Srvf) -> f64 {
        let grid = &q1.grid;
        let sq1: Vec<f64> = q1.q.iter().map(|v| v * v).collect();
        let sq2: Vec<f64> = q2.q.iter().map(|v| v * v).collect();
        let n1 = trapezoid(grid, &sq1).sqrt();
        let n2 = trapezoid(grid, &sq2).sqrt();
        let a: Vec<f64> = q1.q.iter().map(|v| v / n1).collect();
        let b: Vec<f64> = q2.q.iter().map(|v| v / n2).collect();
        let mut best = (f64::NEG_INFINITY, 1.0);
        explore(&a, &b, 0, 0, 0.0, 0.0, &mut best);
        if best.1 > 0.0 {
            best.0 / best.1.sqrt()
        } else {
            best.0
        }
    }
}
