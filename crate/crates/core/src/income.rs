//! Income samples, empirical Lorenz curves, Gini coefficients, and the
//! gamma-mixture simulator used by the synthetic designs.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::math::trapezoid;
use crate::seed::{derive_seed, rng_from};

/// Household income observations for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct IncomeSample {
    pub state_id: String,
    pub values: Vec<f64>,
}

impl IncomeSample {
    /// Validates non-emptiness, non-negativity, and a positive total.
    pub fn new(state_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let state_id = state_id.into();
        if values.is_empty() {
            return Err(Error::invalid(format!("state {state_id}: empty sample")));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!(
                "state {state_id}: incomes must be finite and nonnegative"
            )));
        }
        if values.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid(format!(
                "state {state_id}: total income must be positive"
            )));
        }
        Ok(Self { state_id, values })
    }
}

/// Cumulative income share `L(p)` sampled on a grid of population shares.
///
/// The grid is strictly increasing from 0 to 1; the share starts at 0,
/// ends at 1, is nondecreasing, and never exceeds the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorenzCurve {
    pub grid: Vec<f64>,
    pub share: Vec<f64>,
}

impl LorenzCurve {
    pub fn new(grid: Vec<f64>, share: Vec<f64>) -> Result<Self> {
        if grid.len() != share.len() || grid.len() < 2 {
            return Err(Error::invalid("Lorenz curve needs >= 2 aligned points"));
        }
        if grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
            return Err(Error::invalid("Lorenz grid must run from 0 to 1"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("Lorenz grid must be strictly increasing"));
        }
        if share[0] != 0.0 {
            return Err(Error::invalid("Lorenz share must start at 0"));
        }
        if (share.last().unwrap() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("Lorenz share must end at 1"));
        }
        if share.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            return Err(Error::invalid("Lorenz share must be nondecreasing"));
        }
        if grid.iter().zip(&share).any(|(p, l)| *l > *p + 1e-9) {
            return Err(Error::invalid("Lorenz curve must lie under the diagonal"));
        }
        Ok(Self { grid, share })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Income model for one cluster: a Gamma base plus a Bernoulli-gated
/// Gamma noise term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterIncomeModel {
    pub gamma_shape: f64,
    pub gamma_scale: f64,
    pub noise_prob: f64,
    pub noise_shape: f64,
    pub noise_scale: f64,
}

impl ClusterIncomeModel {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.gamma_shape,
            self.gamma_scale,
            self.noise_shape,
            self.noise_scale,
        ];
        if pos.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid("shape/scale parameters must be positive"));
        }
        if !(0.0..=1.0).contains(&self.noise_prob) {
            return Err(Error::invalid("noise_prob must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Expected income under the model.
    pub fn mean(&self) -> f64 {
        self.gamma_shape * self.gamma_scale + self.noise_prob * self.noise_shape * self.noise_scale
    }
}

/// Ground-truth partition for a synthetic design: which state belongs to
/// which cluster, and each cluster's income model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDesign {
    #[serde(rename = "states")]
    pub state_ids: Vec<String>,
    /// 1-based cluster labels, one per state.
    #[serde(rename = "labels")]
    pub true_labels: Vec<usize>,
    pub models: Vec<ClusterIncomeModel>,
}

impl PartitionDesign {
    pub fn validate(&self) -> Result<()> {
        if self.state_ids.len() != self.true_labels.len() {
            return Err(Error::invalid("one label per state required"));
        }
        if self.state_ids.is_empty() {
            return Err(Error::invalid("design has no states"));
        }
        for &label in &self.true_labels {
            if label == 0 || label > self.models.len() {
                return Err(Error::invalid(format!(
                    "label {label} outside 1..={}",
                    self.models.len()
                )));
            }
        }
        for model in &self.models {
            model.validate()?;
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.state_ids.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.models.len()
    }
}

/// Empirical Lorenz curve of a sample, resampled by linear interpolation
/// onto a uniform grid of `grid_size` points including both endpoints.
pub fn empirical_lorenz(sample: &IncomeSample, grid_size: usize) -> Result<LorenzCurve> {
    if grid_size < 2 {
        return Err(Error::invalid("grid_size must be at least 2"));
    }
    let n = sample.values.len();
    if n == 0 {
        return Err(Error::invalid("empty sample"));
    }
    let mut sorted = sample.values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("validated finite incomes"));
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("sample total must be positive"));
    }

    // Cumulative shares at p_k = k/n, with the (0, 0) anchor prepended.
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    let mut running = 0.0;
    for v in &sorted {
        running += v;
        cum.push(running / total);
    }
    cum[n] = 1.0;

    let mut grid = Vec::with_capacity(grid_size);
    let mut share = Vec::with_capacity(grid_size);
    for i in 0..grid_size {
        let p = i as f64 / (grid_size - 1) as f64;
        grid.push(p);
        // position of p among the knots k/n
        let x = p * n as f64;
        let k = (x.floor() as usize).min(n - 1);
        let frac = x - k as f64;
        let mut l = cum[k] + frac * (cum[k + 1] - cum[k]);
        // interpolation of convex data can only undershoot the diagonal,
        // but guard the endpoints against rounding
        if i == 0 {
            l = 0.0;
        }
        if i == grid_size - 1 {
            l = 1.0;
        }
        share.push(l.clamp(0.0, 1.0));
    }
    LorenzCurve::new(grid, share)
}

/// Gini coefficient: one minus twice the trapezoidal area under the curve.
pub fn gini(curve: &LorenzCurve) -> f64 {
    1.0 - 2.0 * trapezoid(&curve.grid, &curve.share)
}

/// Draw `n_obs` incomes from a cluster model. Each observation is a
/// Gamma(shape, scale) draw plus, with probability `noise_prob`, an
/// independent Gamma(noise_shape, noise_scale) draw.
pub fn simulate_state(
    model: &ClusterIncomeModel,
    state_id: impl Into<String>,
    n_obs: usize,
    rng_seed: u64,
) -> Result<IncomeSample> {
    model.validate()?;
    if n_obs == 0 {
        return Err(Error::invalid("n_obs must be at least 1"));
    }
    let mut rng = rng_from(rng_seed);
    let base = Gamma::new(model.gamma_shape, model.gamma_scale)
        .map_err(|e| Error::invalid(format!("gamma parameters: {e}")))?;
    let noise = Gamma::new(model.noise_shape, model.noise_scale)
        .map_err(|e| Error::invalid(format!("noise gamma parameters: {e}")))?;
    let mut values = Vec::with_capacity(n_obs);
    for _ in 0..n_obs {
        let mut v: f64 = base.sample(&mut rng);
        if model.noise_prob > 0.0 && rng.random::<f64>() < model.noise_prob {
            v += noise.sample(&mut rng);
        }
        values.push(v);
    }
    IncomeSample::new(state_id, values)
}

/// Simulate every state in a design. Each state gets its own seed derived
/// from `rng_seed` and the state's index, so states can be generated in
/// parallel or out of order with identical results.
pub fn simulate_design(
    design: &PartitionDesign,
    n_obs: usize,
    rng_seed: u64,
) -> Result<BTreeMap<String, IncomeSample>> {
    design.validate()?;
    let mut out = BTreeMap::new();
    for (idx, (state, &label)) in design.state_ids.iter().zip(&design.true_labels).enumerate() {
        let model = &design.models[label - 1];
        let sub = derive_seed(rng_seed, &[idx as u64]);
        out.insert(state.clone(), simulate_state(model, state.clone(), n_obs, sub)?);
    }
    Ok(out)
}
