//! Batch pipeline for spatial clustering of income Lorenz curves:
//! simulate → lorenz → similarity → cluster → replicate → evaluate.
//!
//! Every subcommand is a pure function of its inputs and `--seed`; a
//! run manifest listing inputs, outputs, configuration, and timings is
//! written next to the outputs so runs can be reproduced bit for bit.
//! Exit codes: 0 success, 2 invalid input, 3 internal invariant failure.

mod manifest;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lorenzmix::designs::DesignSpec;
use lorenzmix::elastic::{similarity_matrix_with, AlignOptions};
use lorenzmix::graph::load_adjacency;
use lorenzmix::income::{empirical_lorenz, simulate_design, IncomeSample, LorenzCurve};
use lorenzmix::io;
use lorenzmix::posterior::{adjusted_rand_index, rand_index, select_model};
use lorenzmix::replicate::{
    income_statistics, k_recovery_histogram, mean_ari_by_method, mean_selected_lambda,
    run_design_replication, Method, ReplicationConfig,
};
use lorenzmix::Error;

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "lorenzmix", version, about = "Spatial Bayesian clustering of income Lorenz curves")]
struct Cli {
    /// Worker threads for pairwise alignments, grid points, and
    /// replicates (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate household incomes for every state of a design.
    Simulate(SimulateArgs),
    /// Empirical Lorenz curves from an income CSV.
    Lorenz(LorenzArgs),
    /// Pairwise elastic similarity matrix from an income CSV.
    Similarity(SimilarityArgs),
    /// MRFC-MFM clustering over a (lambda, neighbor-limit) grid.
    Cluster(ClusterArgs),
    /// Full replication study for a design file.
    Replicate(ReplicateArgs),
    /// Compare two clusterings (ARI, Rand index).
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Design JSON with {states, labels, models}.
    #[arg(long)]
    design: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    n_obs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LorenzArgs {
    /// Income CSV with state_id,income rows.
    #[arg(long)]
    income: PathBuf,
    #[arg(long, default_value_t = 101)]
    grid_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimilarityArgs {
    #[arg(long)]
    income: PathBuf,
    #[arg(long, default_value_t = 101)]
    grid_size: usize,
    /// Largest lattice step of the alignment search.
    #[arg(long, default_value_t = 5)]
    step_bound: usize,
    /// Also consider the sign-flipped second curve per pair.
    #[arg(long)]
    allow_reflection: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    /// Similarity matrix JSON produced by `similarity`.
    #[arg(long)]
    matrix: PathBuf,
    /// Adjacency CSV `id_a,id_b[,weight]` over the matrix's state set.
    #[arg(long)]
    adjacency: PathBuf,
    /// Chain configuration JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Income CSV; when given, per-cluster and national Gini statistics
    /// are attached to the report.
    #[arg(long)]
    income: Option<PathBuf>,
    /// Ground-truth labels JSON for an ARI column.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Comma-separated lambda grid, e.g. `0,0.4,0.8`.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Comma-separated neighbor-limit grid, e.g. `1,2,3`.
    #[arg(long, value_delimiter = ',')]
    neighbor_limit_grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = 101)]
    grid_size: usize,
}

#[derive(Args)]
struct ReplicateArgs {
    #[arg(long)]
    design: PathBuf,
    /// Adjacency CSV over the design's states; defaults to the bundled
    /// US contiguity restricted to the design's state set.
    #[arg(long)]
    adjacency: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    /// Comma-separated: mrfc-mfm, mfm, kmeans.
    #[arg(long, value_delimiter = ',', default_value = "mrfc-mfm,mfm,kmeans")]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,2,2.5,3")]
    lambda_grid: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    neighbor_limit: usize,
    #[arg(long, default_value_t = 10_000)]
    n_obs: usize,
    #[arg(long, default_value_t = 101)]
    grid_size: usize,
    #[arg(long, default_value_t = 500)]
    iterations: usize,
    #[arg(long, default_value_t = 250)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Labels JSON ({state_ids, labels}) or a summary JSON.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Lorenz(args) => cmd_lorenz(args),
        Command::Similarity(args) => cmd_similarity(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Replicate(args) => cmd_replicate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Internal(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn curves_for(samples: &[IncomeSample], grid_size: usize) -> Result<Vec<LorenzCurve>, Error> {
    samples
        .iter()
        .map(|s| empirical_lorenz(s, grid_size))
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn pretty_json(value: &serde_json::Value) -> Result<String, Error> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::internal(format!("json serialization: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut manifest = RunManifest::new("simulate", Some(args.seed));
    manifest.input(&args.design);
    let design = io::read_design_json(&args.design)?;
    eprintln!("simulating {} states x {} observations...", design.n_states(), args.n_obs);
    let t = std::time::Instant::now();
    let samples_map = simulate_design(&design, args.n_obs, args.seed)?;
    eprintln!("simulation done in {:?}", t.elapsed());
    manifest.timing("simulate", t.elapsed());

    let samples: Vec<IncomeSample> = design
        .state_ids
        .iter()
        .map(|id| samples_map[id].clone())
        .collect();
    let income_path = args.out.join("income.csv");
    io::write_income_csv(&income_path, &samples)?;
    manifest.output(&income_path);

    let truth = io::LabelsFile {
        state_ids: design.state_ids.clone(),
        labels: design.true_labels.clone(),
    };
    let truth_path = args.out.join("truth_labels.json");
    io::write_labels_json(&truth_path, &truth)?;
    manifest.output(&truth_path);

    manifest.config(serde_json::json!({"n_obs": args.n_obs}));
    manifest.write(&args.out)
}

fn cmd_lorenz(args: LorenzArgs) -> Result<(), Error> {
    let mut manifest = RunManifest::new("lorenz", None);
    manifest.input(&args.income);
    let samples = io::read_income_csv(&args.income)?;
    let curves = curves_for(&samples, args.grid_size)?;
    let ids: Vec<String> = samples.iter().map(|s| s.state_id.clone()).collect();
    let path = args.out.join("lorenz.csv");
    io::write_lorenz_csv(&path, &ids, &curves)?;
    manifest.output(&path);
    manifest.config(serde_json::json!({"grid_size": args.grid_size}));
    manifest.write(&args.out)
}

fn cmd_similarity(args: SimilarityArgs) -> Result<(), Error> {
    let mut manifest = RunManifest::new("similarity", None);
    manifest.input(&args.income);
    let samples = io::read_income_csv(&args.income)?;
    let curves = curves_for(&samples, args.grid_size)?;
    let ids: Vec<String> = samples.iter().map(|s| s.state_id.clone()).collect();
    let opts = AlignOptions {
        step_bound: args.step_bound,
        allow_reflection: args.allow_reflection,
    };
    eprintln!(
        "aligning {} curves ({} pairs)...",
        ids.len(),
        ids.len() * (ids.len() - 1) / 2
    );
    let t = std::time::Instant::now();
    let zmat = similarity_matrix_with(&curves, &opts)?;
    eprintln!("alignment done in {:?}", t.elapsed());
    manifest.timing("alignment", t.elapsed());
    io::write_matrix_bundle(&args.out, &ids, &zmat)?;
    manifest.output(&args.out.join("similarity_s.csv"));
    manifest.output(&args.out.join("similarity_z.csv"));
    manifest.output(&args.out.join("similarity.json"));
    manifest.config(serde_json::json!({
        "grid_size": args.grid_size,
        "step_bound": args.step_bound,
        "allow_reflection": args.allow_reflection,
    }));
    manifest.write(&args.out)
}

fn node_set_diff(expected: &[String], got: &[String]) -> String {
    let se: BTreeSet<_> = expected.iter().collect();
    let sg: BTreeSet<_> = got.iter().collect();
    let missing: Vec<_> = se.difference(&sg).map(|s| s.as_str()).collect();
    let extra: Vec<_> = sg.difference(&se).map(|s| s.as_str()).collect();
    format!(
        "missing: [{}], unexpected: [{}]",
        missing.join(", "),
        extra.join(", ")
    )
}

fn cmd_cluster(args: ClusterArgs) -> Result<(), Error> {
    let mut manifest = RunManifest::new("cluster", None);
    manifest.input(&args.matrix);
    manifest.input(&args.adjacency);

    let (ids, zmat) = io::read_matrix_json(&args.matrix)?;
    let edges = load_adjacency(&args.adjacency.display().to_string(), &ids)?;

    let mut config = match &args.config {
        Some(path) => {
            manifest.input(path);
            io::ChainConfigFile::read(path)?
        }
        None => io::ChainConfigFile::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(iterations) = args.iterations {
        config.iterations = iterations;
    }
    if let Some(burn_in) = args.burn_in {
        config.burn_in = burn_in;
    }
    if let Some(grid) = &args.lambda_grid {
        config.lambda_grid = grid.clone();
    }
    if let Some(grid) = &args.neighbor_limit_grid {
        config.neighbor_limit_grid = grid.clone();
    }

    let truth = match &args.truth {
        Some(path) => {
            manifest.input(path);
            let file = io::read_labels_json(path)?;
            if file.state_ids != ids {
                return Err(Error::NodeSetMismatch(format!(
                    "truth labels vs matrix: {}",
                    node_set_diff(&ids, &file.state_ids)
                )));
            }
            Some(file.zero_based()?)
        }
        None => None,
    };

    let prior = config.resolve_prior(&zmat);
    let select = config.select_config();
    eprintln!(
        "running {} chains ({} lambdas x {} limits, {} iterations each)...",
        select.lambda_grid.len() * select.limit_grid.len(),
        select.lambda_grid.len(),
        select.limit_grid.len(),
        select.iterations
    );
    let t = std::time::Instant::now();
    let selection = select_model(&zmat, &ids, &edges, &prior, &select)?;
    eprintln!(
        "grid search done in {:?}; selected lambda {} limit {}",
        t.elapsed(),
        selection.best_lambda,
        selection.best_limit
    );
    manifest.timing("grid_search", t.elapsed());

    // per-combo scoreboard plus one summary file per grid point
    let mut combos_csv = String::from("lambda,neighbor_limit,mdic,k_hat,runtime_ms,selected\n");
    for combo in &selection.combos {
        let selected =
            combo.lambda == selection.best_lambda && combo.neighbor_limit == selection.best_limit;
        combos_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            combo.lambda,
            combo.neighbor_limit,
            combo.summary.mdic.unwrap_or(f64::NAN),
            combo.summary.k_hat(),
            combo.runtime_ms,
            selected
        ));
        let ari = truth
            .as_ref()
            .map(|t| adjusted_rand_index(&combo.summary.z_hat, t))
            .transpose()?;
        let summary_path = args.out.join(format!(
            "summaries/summary_lambda{}_limit{}.json",
            combo.lambda, combo.neighbor_limit
        ));
        io::write_summary_json(&summary_path, &io::SummaryFile::new(&ids, &combo.summary, ari))?;
        manifest.output(&summary_path);
    }
    let combos_path = args.out.join("combos.csv");
    write_text(&combos_path, &combos_csv)?;
    manifest.output(&combos_path);

    let best = selection.best();
    let best_ari = truth
        .as_ref()
        .map(|t| adjusted_rand_index(&best.summary.z_hat, t))
        .transpose()?;
    let selected_path = args.out.join("summary_selected.json");
    io::write_summary_json(
        &selected_path,
        &io::SummaryFile::new(&ids, &best.summary, best_ari),
    )?;
    manifest.output(&selected_path);

    let trace_path = args.out.join("trace_selected.jsonl");
    io::write_trace_jsonl(&trace_path, &best.trace)?;
    manifest.output(&trace_path);

    if let Some(income_path) = &args.income {
        manifest.input(income_path);
        let samples = io::read_income_csv(income_path)?;
        let income_ids: Vec<String> = samples.iter().map(|s| s.state_id.clone()).collect();
        if income_ids != ids {
            return Err(Error::NodeSetMismatch(format!(
                "income file vs matrix: {}",
                node_set_diff(&ids, &income_ids)
            )));
        }
        let stats = income_statistics(&samples, &best.summary.z_hat, args.grid_size)?;
        let report = serde_json::json!({
            "lambda": selection.best_lambda,
            "neighbor_limit": selection.best_limit,
            "mdic": best.summary.mdic,
            "k_hat": best.summary.k_hat(),
            "u_hat": best.summary.u_hat,
            "z_hat": best.summary.z_hat.iter().map(|l| l + 1).collect::<Vec<_>>(),
            "state_ids": ids,
            "cluster_mean_gini": stats.cluster_mean_gini,
            "national_gini": stats.national_gini,
            "state_gini": stats.state_gini,
            "ari_vs_truth": best_ari,
        });
        let report_path = args.out.join("report.json");
        write_text(&report_path, &pretty_json(&report)?)?;
        manifest.output(&report_path);
    }

    manifest.config(
        serde_json::to_value(&config).map_err(|e| Error::internal(format!("config echo: {e}")))?,
    );
    manifest.write(&args.out)
}

fn cmd_replicate(args: ReplicateArgs) -> Result<(), Error> {
    let mut manifest = RunManifest::new("replicate", Some(args.seed));
    manifest.input(&args.design);
    let design = io::read_design_json(&args.design)?;
    let edges = match &args.adjacency {
        Some(path) => {
            manifest.input(path);
            load_adjacency(&path.display().to_string(), &design.state_ids)?
        }
        None => lorenzmix::graph::us_contiguity_edges(&design.state_ids),
    };
    let name = args
        .design
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "design".into());
    let spec = DesignSpec {
        name,
        k_true: design.n_clusters(),
        design,
        neighbor_limit: args.neighbor_limit,
        edges,
    };
    let methods = args
        .methods
        .iter()
        .map(|m| Method::parse(m))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = ReplicationConfig {
        replicates: args.replicates,
        n_obs: args.n_obs,
        grid_size: args.grid_size,
        iterations: args.iterations,
        burn_in: args.burn_in,
        lambda_grid: args.lambda_grid.clone(),
        seed: args.seed,
        methods,
        ..ReplicationConfig::default()
    };
    eprintln!(
        "replicating {}: {} replicates x ({} lambdas + extras)...",
        spec.name,
        cfg.replicates,
        cfg.lambda_grid.len()
    );
    let t = std::time::Instant::now();
    let rows = run_design_replication(&spec, &cfg)?;
    eprintln!("replication done in {:?}", t.elapsed());
    manifest.timing("replication", t.elapsed());

    let report_path = args.out.join("replication.csv");
    io::write_replication_csv(&report_path, &rows)?;
    manifest.output(&report_path);

    // inferred-K histogram data
    let mut khist = String::from("method,k_hat,count\n");
    for ((method, k), count) in k_recovery_histogram(&rows) {
        khist.push_str(&format!("{method},{k},{count}\n"));
    }
    let khist_path = args.out.join("k_histogram.csv");
    write_text(&khist_path, &khist)?;
    manifest.output(&khist_path);

    let mut ari_csv = String::from("method,mean_ari\n");
    for (method, ari) in mean_ari_by_method(&rows) {
        ari_csv.push_str(&format!("{method},{ari}\n"));
    }
    let ari_path = args.out.join("ari_summary.csv");
    write_text(&ari_path, &ari_csv)?;
    manifest.output(&ari_path);

    let stats = serde_json::json!({
        "k_true": spec.k_true,
        "mean_selected_lambda": mean_selected_lambda(&rows),
        "replicates": args.replicates,
    });
    let stats_path = args.out.join("study.json");
    write_text(&stats_path, &pretty_json(&stats)?)?;
    manifest.output(&stats_path);

    manifest.config(serde_json::json!({
        "replicates": args.replicates,
        "n_obs": args.n_obs,
        "grid_size": args.grid_size,
        "iterations": args.iterations,
        "burn_in": args.burn_in,
        "lambda_grid": args.lambda_grid,
        "neighbor_limit": args.neighbor_limit,
        "methods": args.methods,
    }));
    manifest.write(&args.out)
}

fn read_labels_lenient(path: &Path) -> Result<io::LabelsFile, Error> {
    match io::read_labels_json(path) {
        Ok(labels) => Ok(labels),
        Err(first_err) => {
            // a summary file also carries labels
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            match serde_json::from_str::<io::SummaryFile>(&text) {
                Ok(summary) if summary.z_hat.len() == summary.state_ids.len() => {
                    Ok(io::LabelsFile {
                        state_ids: summary.state_ids,
                        labels: summary.z_hat,
                    })
                }
                _ => Err(first_err),
            }
        }
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let labels = read_labels_lenient(&args.labels)?;
    let truth = read_labels_lenient(&args.truth)?;
    if labels.state_ids != truth.state_ids {
        return Err(Error::NodeSetMismatch(format!(
            "labels vs truth: {}",
            node_set_diff(&truth.state_ids, &labels.state_ids)
        )));
    }
    let z1 = labels.zero_based()?;
    let z2 = truth.zero_based()?;
    let report = serde_json::json!({
        "ari": adjusted_rand_index(&z1, &z2)?,
        "rand_index": rand_index(&z1, &z2)?,
        "k_hat": z1.iter().collect::<BTreeSet<_>>().len(),
        "k_true": z2.iter().collect::<BTreeSet<_>>().len(),
        "n": z1.len(),
    });
    let text = pretty_json(&report)?;
    print!("{text}");
    if let Some(out) = &args.out {
        let mut manifest = RunManifest::new("evaluate", None);
        manifest.input(&args.labels);
        manifest.input(&args.truth);
        let path = out.join("evaluation.json");
        write_text(&path, &text)?;
        manifest.output(&path);
        manifest.write(out)?;
    }
    Ok(())
}
