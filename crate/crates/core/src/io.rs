//! On-disk formats shared between the library, the CLI, and the tests.
//!
//! - income CSV: `state_id,income`, one row per household observation
//! - design JSON: `{states, labels, models}` (labels are 1-based)
//! - labels JSON: `{state_ids, labels}` (1-based)
//! - Lorenz CSV: `state_id,p,L`
//! - matrix JSON: `{state_ids, s, z}`; matrix CSV: dense with id header
//! - trace JSONL: one `{iteration, z, U, T, log_likelihood}` per line
//! - summary JSON: selected iteration with `z_hat` (1-based), `u_hat`,
//!   `t_hat`, `mdic`, λ, neighbor limit
//! - replication CSV: `replicate,method,lambda,k_hat,ari,mdic,runtime_ms,selected`

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elastic::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::income::{IncomeSample, LorenzCurve, PartitionDesign};
use crate::mfm::{ChainTrace, KPrior, PriorConfig, Scoring};
use crate::posterior::{MdicPenalty, PosteriorSummary, SelectConfig};
use crate::replicate::ReplicateRow;

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path_str(path), e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(path_str(path), e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path_str(path), e))
}

// ---------------------------------------------------------------- income CSV

pub fn write_income_csv(path: &Path, samples: &[IncomeSample]) -> Result<()> {
    let mut out = String::from("state_id,income\n");
    for s in samples {
        for v in &s.values {
            writeln!(out, "{},{}", s.state_id, v).expect("string write");
        }
    }
    write_file(path, &out)
}

/// Read household rows grouped by state, states in order of first
/// appearance. Malformed rows fail with their line number.
pub fn read_income_csv(path: &Path) -> Result<Vec<IncomeSample>> {
    let text = read_file(path)?;
    let name = path_str(path);
    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 1 && line.to_ascii_lowercase().starts_with("state_id") {
            continue;
        }
        let Some((id, value)) = line.split_once(',') else {
            return Err(Error::parse(&name, lineno, "expected `state_id,income`"));
        };
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::parse(&name, lineno, "empty state id"));
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::parse(&name, lineno, format!("bad income `{}`", value.trim())))?;
        if !value.is_finite() || value < 0.0 {
            return Err(Error::parse(&name, lineno, "income must be nonnegative"));
        }
        if !grouped.contains_key(id) {
            order.push(id.to_string());
        }
        grouped.entry(id.to_string()).or_default().push(value);
    }
    if order.is_empty() {
        return Err(Error::parse(&name, 1, "no income rows"));
    }
    order
        .into_iter()
        .map(|id| {
            let values = grouped.remove(&id).expect("grouped by construction");
            IncomeSample::new(id, values)
        })
        .collect()
}

// ------------------------------------------------------------------ lorenz CSV

pub fn write_lorenz_csv(path: &Path, ids: &[String], curves: &[LorenzCurve]) -> Result<()> {
    let mut out = String::from("state_id,p,L\n");
    for (id, curve) in ids.iter().zip(curves) {
        for (p, l) in curve.grid.iter().zip(&curve.share) {
            writeln!(out, "{id},{p},{l}").expect("string write");
        }
    }
    write_file(path, &out)
}

// ------------------------------------------------------------------ design JSON

pub fn read_design_json(path: &Path) -> Result<PartitionDesign> {
    let design: PartitionDesign = serde_json::from_str(&read_file(path)?)
        .map_err(|e| Error::parse(path_str(path), e.line(), e.to_string()))?;
    design.validate()?;
    Ok(design)
}

pub fn write_design_json(path: &Path, design: &PartitionDesign) -> Result<()> {
    write_file(path, &to_pretty_json(design)?)
}

// ------------------------------------------------------------------ labels JSON

/// Cluster labels on disk; 1-based per the domain convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsFile {
    pub state_ids: Vec<String>,
    pub labels: Vec<usize>,
}

impl LabelsFile {
    pub fn from_zero_based(state_ids: Vec<String>, labels: &[usize]) -> Self {
        Self {
            state_ids,
            labels: labels.iter().map(|l| l + 1).collect(),
        }
    }

    pub fn zero_based(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .map(|&l| {
                if l == 0 {
                    Err(Error::invalid("labels on disk are 1-based"))
                } else {
                    Ok(l - 1)
                }
            })
            .collect()
    }
}

pub fn read_labels_json(path: &Path) -> Result<LabelsFile> {
    let labels: LabelsFile = serde_json::from_str(&read_file(path)?)
        .map_err(|e| Error::parse(path_str(path), e.line(), e.to_string()))?;
    if labels.state_ids.len() != labels.labels.len() {
        return Err(Error::invalid("labels file: one label per state required"));
    }
    Ok(labels)
}

pub fn write_labels_json(path: &Path, labels: &LabelsFile) -> Result<()> {
    write_file(path, &to_pretty_json(labels)?)
}

// ------------------------------------------------------------------ matrix files

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixFile {
    state_ids: Vec<String>,
    s: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
}

pub fn write_matrix_json(path: &Path, ids: &[String], zmat: &SimilarityMatrix) -> Result<()> {
    let file = MatrixFile {
        state_ids: ids.to_vec(),
        s: zmat.s_rows(),
        z: zmat.z_rows(),
    };
    write_file(path, &to_pretty_json(&file)?)
}

pub fn read_matrix_json(path: &Path) -> Result<(Vec<String>, SimilarityMatrix)> {
    let file: MatrixFile = serde_json::from_str(&read_file(path)?)
        .map_err(|e| Error::parse(path_str(path), e.line(), e.to_string()))?;
    let n = file.state_ids.len();
    if file.s.len() != n {
        return Err(Error::invalid(format!(
            "matrix file: {} ids but {} S rows",
            n,
            file.s.len()
        )));
    }
    let zmat = SimilarityMatrix::from_s_rows(file.s)?;
    Ok((file.state_ids, zmat))
}

/// Dense square CSV with a leading id column and an id header row.
pub fn write_square_csv(path: &Path, ids: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::from("id");
    for id in ids {
        write!(out, ",{id}").expect("string write");
    }
    out.push('\n');
    for (id, row) in ids.iter().zip(rows) {
        write!(out, "{id}").expect("string write");
        for v in row {
            write!(out, ",{v}").expect("string write");
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Write S and Z as CSV plus the combined JSON next to them.
pub fn write_matrix_bundle(dir: &Path, ids: &[String], zmat: &SimilarityMatrix) -> Result<()> {
    write_square_csv(&dir.join("similarity_s.csv"), ids, &zmat.s_rows())?;
    write_square_csv(&dir.join("similarity_z.csv"), ids, &zmat.z_rows())?;
    write_matrix_json(&dir.join("similarity.json"), ids, zmat)
}

// ------------------------------------------------------------------ trace JSONL

#[derive(Serialize, Deserialize)]
struct TraceRecord {
    iteration: usize,
    z: Vec<usize>,
    #[serde(rename = "U")]
    u: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    t: Vec<Vec<f64>>,
    log_likelihood: f64,
}

/// One record per retained sweep; labels written 1-based.
pub fn write_trace_jsonl(path: &Path, trace: &ChainTrace) -> Result<()> {
    let mut out = String::new();
    for (state, ll) in trace.states.iter().zip(&trace.log_likelihoods) {
        let record = TraceRecord {
            iteration: state.iteration,
            z: state.z.iter().map(|l| l + 1).collect(),
            u: state.u.clone(),
            t: state.t.clone(),
            log_likelihood: *ll,
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::internal(format!("trace serialization: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    write_file(path, &out)
}

// ------------------------------------------------------------------ summary JSON

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryFile {
    pub state_ids: Vec<String>,
    pub lambda: f64,
    pub neighbor_limit: usize,
    pub mdic: Option<f64>,
    pub k_hat: usize,
    pub selected_iteration: usize,
    /// 1-based labels aligned with `state_ids`.
    pub z_hat: Vec<usize>,
    pub u_hat: Vec<Vec<f64>>,
    pub t_hat: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari_vs_truth: Option<f64>,
}

impl SummaryFile {
    pub fn new(ids: &[String], summary: &PosteriorSummary, ari_vs_truth: Option<f64>) -> Self {
        Self {
            state_ids: ids.to_vec(),
            lambda: summary.lambda,
            neighbor_limit: summary.neighbor_limit,
            mdic: summary.mdic,
            k_hat: summary.k_hat(),
            selected_iteration: summary.selected_iteration,
            z_hat: summary.z_hat.iter().map(|l| l + 1).collect(),
            u_hat: summary.u_hat.clone(),
            t_hat: summary.t_hat.clone(),
            ari_vs_truth,
        }
    }
}

pub fn write_summary_json(path: &Path, file: &SummaryFile) -> Result<()> {
    write_file(path, &to_pretty_json(file)?)
}

// ------------------------------------------------------------------ report CSV

pub fn write_replication_csv(path: &Path, rows: &[ReplicateRow]) -> Result<()> {
    let mut out = String::from("replicate,method,lambda,k_hat,ari,mdic,runtime_ms,selected\n");
    for r in rows {
        let lambda = r.lambda.map(|l| l.to_string()).unwrap_or_default();
        let mdic = r.mdic.map(|m| m.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.replicate, r.method, lambda, r.k_hat, r.ari, mdic, r.runtime_ms, r.selected
        )
        .expect("string write");
    }
    write_file(path, &out)
}

// ------------------------------------------------------------------ chain config

/// JSON configuration for the clustering pipeline: the prior (μ0 left
/// null derives the max/min rule from the data), the grids, and the run
/// lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfigFile {
    pub gamma_dir: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k0: f64,
    pub mu0_diag: Option<f64>,
    pub mu0_offdiag: Option<f64>,
    pub k_prior: KPrior,
    pub include_diagonal: bool,
    pub lambda_grid: Vec<f64>,
    pub neighbor_limit_grid: Vec<usize>,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub kmeans_restarts: usize,
    pub mdic_penalty: MdicPenalty,
    pub scoring: Scoring,
}

impl Default for ChainConfigFile {
    fn default() -> Self {
        Self {
            gamma_dir: 1.0,
            alpha: 1.0,
            beta: 1.0,
            k0: 2.0,
            mu0_diag: None,
            mu0_offdiag: None,
            k_prior: KPrior::default(),
            include_diagonal: false,
            lambda_grid: (0..=15).map(|i| i as f64 * 0.2).collect(),
            neighbor_limit_grid: vec![1, 2, 3],
            iterations: 500,
            burn_in: 250,
            seed: 0,
            kmeans_restarts: 10,
            mdic_penalty: MdicPenalty::default(),
            scoring: Scoring::default(),
        }
    }
}

impl ChainConfigFile {
    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_file(path)?)
            .map_err(|e| Error::parse(path_str(path), e.line(), e.to_string()))
    }

    /// Concrete prior for a given similarity matrix (μ0 max/min rule
    /// unless overridden).
    pub fn resolve_prior(&self, zmat: &SimilarityMatrix) -> PriorConfig {
        let defaults = PriorConfig::default_for(zmat);
        PriorConfig {
            gamma_dir: self.gamma_dir,
            alpha: self.alpha,
            beta: self.beta,
            k0: self.k0,
            mu0_diag: self.mu0_diag.unwrap_or(defaults.mu0_diag),
            mu0_offdiag: self.mu0_offdiag.unwrap_or(defaults.mu0_offdiag),
            lambda: 0.0,
            k_prior: self.k_prior,
            include_diagonal: self.include_diagonal,
        }
    }

    pub fn select_config(&self) -> SelectConfig {
        SelectConfig {
            lambda_grid: self.lambda_grid.clone(),
            limit_grid: self.neighbor_limit_grid.clone(),
            iterations: self.iterations,
            burn_in: self.burn_in,
            seed: self.seed,
            penalty: self.mdic_penalty,
            scoring: self.scoring,
        }
    }
}

fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::internal(format!("json serialization: {e}")))?;
    text.push('\n');
    Ok(text)
}
