//! End-to-end runs of the binary over small synthetic inputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lorenzmix"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lorenzmix-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn lorenzmix");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn tiny_design(path: &Path) {
    // 6 states, 2 clusters, modest incomes so the smoke runs are fast
    let design = serde_json::json!({
        "states": ["A", "B", "C", "D", "E", "F"],
        "labels": [1, 1, 1, 2, 2, 2],
        "models": [
            {"gamma_shape": 0.7, "gamma_scale": 50000.0, "noise_prob": 0.05,
             "noise_shape": 0.4, "noise_scale": 50000.0},
            {"gamma_shape": 2.2, "gamma_scale": 50000.0, "noise_prob": 0.05,
             "noise_shape": 0.4, "noise_scale": 50000.0}
        ]
    });
    std::fs::write(path, serde_json::to_string_pretty(&design).unwrap()).unwrap();
}

fn tiny_adjacency(path: &Path) {
    // path graph A-B-C-D-E-F
    std::fs::write(path, "A,B\nB,C\nC,D\nD,E\nE,F\n").unwrap();
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir = workdir("simulate");
    let design = dir.join("design.json");
    tiny_design(&design);
    for sub in ["one", "two"] {
        run_ok(bin().args([
            "simulate",
            "--design",
            design.to_str().unwrap(),
            "--n-obs",
            "200",
            "--seed",
            "9",
            "--out",
            dir.join(sub).to_str().unwrap(),
        ]));
    }
    let a = std::fs::read(dir.join("one/income.csv")).unwrap();
    let b = std::fs::read(dir.join("two/income.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    // 6 states x 200 observations + header
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 6 * 200);
    assert!(dir.join("one/truth_labels.json").exists());
    assert!(dir.join("one/manifest.json").exists());
}

#[test]
fn full_pipeline_smoke() {
    let dir = workdir("pipeline");
    let design = dir.join("design.json");
    let adjacency = dir.join("adjacency.csv");
    tiny_design(&design);
    tiny_adjacency(&adjacency);

    run_ok(bin().args([
        "simulate",
        "--design",
        design.to_str().unwrap(),
        "--n-obs",
        "600",
        "--seed",
        "3",
        "--out",
        dir.join("sim").to_str().unwrap(),
    ]));
    let income = dir.join("sim/income.csv");

    run_ok(bin().args([
        "lorenz",
        "--income",
        income.to_str().unwrap(),
        "--grid-size",
        "41",
        "--out",
        dir.join("lorenz").to_str().unwrap(),
    ]));
    let lorenz = std::fs::read_to_string(dir.join("lorenz/lorenz.csv")).unwrap();
    assert_eq!(lorenz.lines().count(), 1 + 6 * 41);


    run_ok(bin().args([
        "similarity",
        "--income",
        income.to_str().unwrap(),
        "--grid-size",
        "41",
        "--out",
        dir.join("sim41").to_str().unwrap(),
    ]));
    // deterministic regardless of thread count
    run_ok(bin().args([
        "--threads",
        "1",
        "similarity",
        "--income",
        income.to_str().unwrap(),
        "--grid-size",
        "41",
        "--out",
        dir.join("sim41b").to_str().unwrap(),
    ]));
    let m1 = std::fs::read(dir.join("sim41/similarity.json")).unwrap();
    let m2 = std::fs::read(dir.join("sim41b/similarity.json")).unwrap();
    assert_eq!(m1, m2);

    run_ok(bin().args([
        "cluster",
        "--matrix",
        dir.join("sim41/similarity.json").to_str().unwrap(),
        "--adjacency",
        adjacency.to_str().unwrap(),
        "--truth",
        dir.join("sim/truth_labels.json").to_str().unwrap(),
        "--income",
        income.to_str().unwrap(),
        "--grid-size",
        "41",
        "--iterations",
        "60",
        "--burn-in",
        "20",
        "--seed",
        "5",
        "--lambda-grid",
        "0,1",
        "--neighbor-limit-grid",
        "1",
        "--out",
        dir.join("cluster").to_str().unwrap(),
    ]));
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("cluster/summary_selected.json")).unwrap(),
    )
    .unwrap();
    assert!(summary["k_hat"].as_u64().unwrap() >= 1);
    assert_eq!(summary["z_hat"].as_array().unwrap().len(), 6);
    // two well-separated clusters on a path graph: ARI should be high
    let ari = summary["ari_vs_truth"].as_f64().unwrap();
    assert!(ari > 0.8, "ari {ari}");
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("cluster/report.json")).unwrap(),
    )
    .unwrap();
    assert!(report["national_gini"].as_f64().unwrap() > 0.0);
    assert_eq!(report["cluster_mean_gini"].as_array().unwrap().len(),
               summary["k_hat"].as_u64().unwrap() as usize);
    assert!(dir.join("cluster/trace_selected.jsonl").exists());
    assert!(dir.join("cluster/combos.csv").exists());

    // evaluate the selected summary against the truth
    let out = run_ok(bin().args([
        "evaluate",
        "--labels",
        dir.join("cluster/summary_selected.json").to_str().unwrap(),
        "--truth",
        dir.join("sim/truth_labels.json").to_str().unwrap(),
    ]));
    let eval: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("evaluate prints JSON");
    assert_eq!(eval["ari"].as_f64().unwrap(), ari);
    assert_eq!(eval["k_true"].as_u64().unwrap(), 2);
}

#[test]
fn replicate_smoke_produces_reports() {
    let dir = workdir("replicate");
    let design = dir.join("design.json");
    let adjacency = dir.join("adjacency.csv");
    tiny_design(&design);
    tiny_adjacency(&adjacency);
    run_ok(bin().args([
        "replicate",
        "--design",
        design.to_str().unwrap(),
        "--adjacency",
        adjacency.to_str().unwrap(),
        "--replicates",
        "2",
        "--n-obs",
        "200",
        "--grid-size",
        "31",
        "--iterations",
        "30",
        "--burn-in",
        "10",
        "--lambda-grid",
        "0.5,1.5",
        "--neighbor-limit",
        "1",
        "--seed",
        "11",
        "--out",
        dir.join("rep").to_str().unwrap(),
    ]));
    let report = std::fs::read_to_string(dir.join("rep/replication.csv")).unwrap();
    // header + 2 replicates x (2 mrfc rows + 1 mfm + 1 kmeans)
    assert_eq!(report.lines().count(), 1 + 2 * 4, "{report}");
    assert!(report.starts_with("replicate,method,lambda,k_hat,ari,mdic,runtime_ms,selected"));
    assert!(dir.join("rep/k_histogram.csv").exists());
    assert!(dir.join("rep/ari_summary.csv").exists());
    assert!(dir.join("rep/study.json").exists());

    // kmeans-only run uses the truth K fallback
    run_ok(bin().args([
        "replicate",
        "--design",
        design.to_str().unwrap(),
        "--adjacency",
        adjacency.to_str().unwrap(),
        "--replicates",
        "1",
        "--methods",
        "kmeans",
        "--n-obs",
        "200",
        "--grid-size",
        "31",
        "--iterations",
        "10",
        "--burn-in",
        "2",
        "--seed",
        "1",
        "--out",
        dir.join("rep2").to_str().unwrap(),
    ]));
}

#[test]
fn bad_inputs_exit_with_code_2() {
    let dir = workdir("badinput");
    let income = dir.join("bad.csv");
    std::fs::write(&income, "state_id,income\nA,100\nA,notanumber\n").unwrap();
    let out = bin()
        .args([
            "lorenz",
            "--income",
            income.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(":3"), "line number missing: {stderr}");

    // node-set mismatch between matrix and adjacency reports the diff
    let design = dir.join("design.json");
    tiny_design(&design);
    run_ok(bin().args([
        "simulate",
        "--design",
        design.to_str().unwrap(),
        "--n-obs",
        "100",
        "--seed",
        "2",
        "--out",
        dir.join("sim").to_str().unwrap(),
    ]));
    run_ok(bin().args([
        "similarity",
        "--income",
        dir.join("sim/income.csv").to_str().unwrap(),
        "--grid-size",
        "21",
        "--out",
        dir.join("simmat").to_str().unwrap(),
    ]));
    let adjacency = dir.join("adjacency.csv");
    std::fs::write(&adjacency, "A,B\nB,ZZ\n").unwrap();
    let out = bin()
        .args([
            "cluster",
            "--matrix",
            dir.join("simmat/similarity.json").to_str().unwrap(),
            "--adjacency",
            adjacency.to_str().unwrap(),
            "--iterations",
            "10",
            "--burn-in",
            "2",
            "--lambda-grid",
            "0",
            "--neighbor-limit-grid",
            "1",
            "--out",
            dir.join("cl").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("ZZ"), "unknown id not named: {stderr}");

    // missing file
    let out = bin()
        .args([
            "simulate",
            "--design",
            dir.join("nope.json").to_str().unwrap(),
            "--out",
            dir.join("x").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identical_income_columns_give_unit_similarity() {
    let dir = workdir("identical");
    let mut csv = String::from("state_id,income\n");
    for v in [10_000, 20_000, 30_000, 55_000, 90_000] {
        csv.push_str(&format!("A,{v}\n"));
    }
    for v in [10_000, 20_000, 30_000, 55_000, 90_000] {
        csv.push_str(&format!("B,{v}\n"));
    }
    let income = dir.join("income.csv");
    std::fs::write(&income, csv).unwrap();
    run_ok(bin().args([
        "similarity",
        "--income",
        income.to_str().unwrap(),
        "--grid-size",
        "21",
        "--out",
        dir.join("out").to_str().unwrap(),
    ]));
    let matrix: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("out/similarity.json")).unwrap(),
    )
    .unwrap();
    let s12 = matrix["s"][0][1].as_f64().unwrap();
    assert!((s12 - 1.0).abs() < 1e-9, "identical states should align to 1, got {s12}");
}

#[test]
fn shipped_design_fixture_parses() {
    let dir = workdir("fixture");
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/designs/design1-strong.json");
    run_ok(bin().args([
        "simulate",
        "--design",
        fixture.to_str().unwrap(),
        "--n-obs",
        "10",
        "--seed",
        "4",
        "--out",
        dir.join("out").to_str().unwrap(),
    ]));
    let income = std::fs::read_to_string(dir.join("out/income.csv")).unwrap();
    assert_eq!(income.lines().count(), 1 + 51 * 10);
}
