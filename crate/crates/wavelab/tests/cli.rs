//! End-to-end runs of the `wavelab` binary: artifact layout, manifest
//! determinism, override plumbing, and failure exit codes.

use std::path::Path;
use std::process::{Command, Output};

use wavelab::galerkin::EnergyTrace;
use wavelab::io::Manifest;

fn wavelab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wavelab"))
}

fn write_config(dir: &Path, body: &serde_json::Value) -> std::path::PathBuf {
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(body).unwrap()).unwrap();
    path
}

fn run_ok(cmd: &mut Command) -> (Output, std::path::PathBuf) {
    let output = cmd.output().unwrap();
    assert!(
        output.status.success(),
        "run failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout.clone()).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1, "stdout must carry exactly the manifest path, got: {stdout:?}");
    let manifest_path = std::path::PathBuf::from(lines[0]);
    assert!(manifest_path.is_file(), "manifest path from stdout must exist");
    (output, manifest_path)
}

fn load_manifest(path: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn simulate_config(out_dir: &Path) -> serde_json::Value {
    serde_json::json!({
        "grid": {"dimension": 1, "modes_per_axis": 32},
        "data": {"kind": "zero"},
        "solver": {"p": 5.0, "cutoff_j": 3, "dt": 1e-2, "t_end": 0.2},
        "output_dir": out_dir,
        "seed": 7
    })
}

#[test]
fn simulate_zero_data_emits_zero_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &simulate_config(&out));
    let (_, manifest_path) = run_ok(wavelab().args(["simulate", "--config"]).arg(&config));
    let manifest = load_manifest(&manifest_path);
    assert_eq!(manifest.mode, "simulate");
    assert_eq!(manifest.seed, 7);
    let names: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
    for expected in ["config.json", "state_u.json", "state_ut.json", "trajectory.csv"] {
        assert!(names.contains(&expected), "missing {expected} in {names:?}");
    }
    let trace = EnergyTrace::read_csv(std::fs::File::open(out.join("trajectory.csv")).unwrap()).unwrap();
    assert_eq!(trace.times.len(), 21);
    for i in 0..trace.times.len() {
        assert_eq!(trace.total(i), 0.0, "zero data must stay at zero energy");
    }
    // recorded hashes match the files on disk
    for entry in &manifest.files {
        let actual = wavelab::io::sha256_file(out.join(&entry.path)).unwrap();
        assert_eq!(actual, entry.sha256, "{} hash drifted", entry.path);
    }
}

#[test]
fn identical_runs_produce_identical_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &simulate_config(&out));
    let (_, manifest_path) = run_ok(wavelab().args(["simulate", "--config"]).arg(&config));
    let first = std::fs::read(&manifest_path).unwrap();
    let (_, manifest_path) = run_ok(wavelab().args(["simulate", "--config"]).arg(&config));
    let second = std::fs::read(&manifest_path).unwrap();
    assert_eq!(first, second, "reruns of one config must be byte-identical");
}

#[test]
fn rerun_from_emitted_config_reproduces_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &simulate_config(&out));
    let (_, manifest_path) = run_ok(wavelab().args(["simulate", "--config"]).arg(&config));
    let first = std::fs::read(&manifest_path).unwrap();
    // the effective config is itself a valid input and pins the mode
    let emitted = out.join("config.json");
    let (_, manifest_path) = run_ok(wavelab().args(["simulate", "--config"]).arg(&emitted));
    let second = std::fs::read(&manifest_path).unwrap();
    assert_eq!(first, second);
}

#[test]
fn overrides_change_the_config_hash_and_seed_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &simulate_config(&out));
    let (_, manifest_path) = run_ok(wavelab().args(["simulate", "--config"]).arg(&config));
    let base = load_manifest(&manifest_path);
    let (_, manifest_path) = run_ok(
        wavelab()
            .args(["simulate", "--config"])
            .arg(&config)
            .args(["--set", "solver.dt=5e-3", "--seed", "99"]),
    );
    let tweaked = load_manifest(&manifest_path);
    assert_ne!(base.config_sha256, tweaked.config_sha256);
    assert_eq!(tweaked.seed, 99);
    let trace = EnergyTrace::read_csv(std::fs::File::open(out.join("trajectory.csv")).unwrap()).unwrap();
    assert_eq!(trace.times.len(), 41, "halved dt doubles the step count");
}

#[test]
fn invalid_config_fails_without_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut doc = simulate_config(&out);
    doc["solver"]["dtt"] = serde_json::json!(1e-3);
    let config = write_config(dir.path(), &doc);
    let output = wavelab().args(["simulate", "--config"]).arg(&config).output().unwrap();
    assert!(!output.status.success());
    assert!(output.stdout.is_empty(), "failures must keep stdout clean");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("dtt"), "diagnostic should name the typo, got: {stderr}");
}

#[test]
fn blowup_aborts_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut doc = simulate_config(&out);
    doc["data"] = serde_json::json!({"kind": "cosine", "mode": [1, 0, 0], "amplitude": 40.0});
    doc["solver"] = serde_json::json!({"p": 7.0, "cutoff_j": 3, "dt": 5e-2, "t_end": 2.0});
    let config = write_config(dir.path(), &doc);
    let output = wavelab().args(["simulate", "--config"]).arg(&config).output().unwrap();
    assert!(!output.status.success());
    assert!(output.stdout.is_empty());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("blowup guard"), "got: {stderr}");
    assert!(!out.join("manifest.json").exists(), "aborted runs must not publish a manifest");
}

#[test]
fn ensemble_emits_traces_and_per_cutoff_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let doc = serde_json::json!({
        "grid": {"dimension": 1, "modes_per_axis": 32},
        "data": {"kind": "power_law", "sigma": 1.5, "amplitude": 0.2},
        "solver": {"p": 5.0, "cutoff_j": 0, "dt": 1e-2, "t_end": 0.3},
        "randomization": {"family": "gaussian"},
        "ensemble": {"samples": 3, "cutoffs": [2, 3]},
        "output_dir": out,
        "seed": 11
    });
    let config = write_config(dir.path(), &doc);
    let (_, manifest_path) = run_ok(wavelab().args(["ensemble", "--config"]).arg(&config));
    let manifest = load_manifest(&manifest_path);
    let names: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
    for m in 0..3 {
        for j in [2, 3] {
            let name = format!("trace_s{m}_j{j}.csv");
            assert!(names.contains(&name.as_str()), "missing {name}");
        }
    }
    for j in [2, 3] {
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join(format!("apriori_j{j}.json"))).unwrap())
                .unwrap();
        assert_eq!(report["samples"], 3);
        assert_eq!(report["aborted_runs"], 0);
        assert!(report["quantile"].as_f64().unwrap().is_finite());
    }
}

#[test]
fn tails_mode_writes_survival_curve_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let doc = serde_json::json!({
        "grid": {"dimension": 1, "modes_per_axis": 16},
        "data": {"kind": "power_law", "sigma": 1.2},
        "randomization": {"family": "gaussian"},
        "tails": {
            "t_end": 0.5,
            "q1": 2.0,
            "norm": {"s": 0.0, "p": 4.0, "r": 2.0},
            "time_nodes": 8,
            "samples": 2000,
            "lambda_count": 25
        },
        "output_dir": out,
        "seed": 5
    });
    let config = write_config(dir.path(), &doc);
    let (_, manifest_path) = run_ok(wavelab().args(["tails", "--config"]).arg(&config));
    let manifest = load_manifest(&manifest_path);
    let names: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
    assert!(names.contains(&"tails.csv") && names.contains(&"tail_fit.json"));
    let csv = std::fs::read_to_string(out.join("tails.csv")).unwrap();
    assert!(csv.starts_with("lambda,survival,ci_low,ci_high\n"));
    assert_eq!(csv.lines().count(), 1 + 25 + 1);
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("tail_fit.json")).unwrap()).unwrap();
    assert!(fit["fitted_c"].as_f64().unwrap() > 0.0);
}

#[test]
fn inequalities_and_report_modes_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ineq");
    let doc = serde_json::json!({
        "grid": {"dimension": 1, "modes_per_axis": 32},
        "inequalities": {"power_law_count": 4},
        "output_dir": out,
        "seed": 3
    });
    let config = write_config(dir.path(), &doc);
    let (_, manifest_path) = run_ok(wavelab().args(["inequalities", "--config"]).arg(&config));
    let manifest = load_manifest(&manifest_path);
    assert!(manifest.files.iter().any(|f| f.path == "reports.json"));
    let reports: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(out.join("reports.json")).unwrap()).unwrap();
    assert_eq!(reports.len(), 11);
    assert!(reports.iter().all(|r| r["pass"].as_bool().unwrap()));

    // report mode: norm table for a profile plus quantiles from prior traces
    let sim_out = dir.path().join("sim");
    let mut sim_doc = simulate_config(&sim_out);
    sim_doc["data"] = serde_json::json!({"kind": "cosine", "mode": [2, 0, 0], "amplitude": 0.3});
    let sim_config = write_config(dir.path(), &sim_doc);
    run_ok(wavelab().args(["simulate", "--config"]).arg(&sim_config));
    let rep_out = dir.path().join("rep");
    let rep_doc = serde_json::json!({
        "grid": {"dimension": 1, "modes_per_axis": 32},
        "data": {"kind": "cosine", "mode": [2, 0, 0], "amplitude": 0.3},
        "report": {
            "norms": [
                {"label": "besov_half", "s": 0.5, "p": 2.0, "r": 2.0},
                {"label": "sup_blocks", "s": 0.0, "p": 2.0, "r": "inf"}
            ],
            "traces": [sim_out.join("trajectory.csv")]
        },
        "output_dir": rep_out,
        "seed": 1
    });
    let rep_config = write_config(dir.path(), &rep_doc);
    let (_, manifest_path) = run_ok(wavelab().args(["report", "--config"]).arg(&rep_config));
    let manifest = load_manifest(&manifest_path);
    let names: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
    assert!(names.contains(&"norms.csv") && names.contains(&"apriori_recomputed.json"));
    let norms = std::fs::read_to_string(rep_out.join("norms.csv")).unwrap();
    assert!(norms.starts_with("norm_label,s,p,r,value,j_min,j_max\n"));
    assert_eq!(norms.lines().count(), 3);
    let single_mode_row = norms.lines().nth(1).unwrap();
    // a single cosine occupies exactly one dyadic level
    assert!(single_mode_row.ends_with(",1,1"), "got row: {single_mode_row}");
}

#[test]
fn remainder_mode_round_trips_its_randomization_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let doc = serde_json::json!({
        "grid": {"dimension": 1, "modes_per_axis": 32},
        "data": {"kind": "power_law", "sigma": 1.5, "amplitude": 0.2},
        "solver": {"p": 5.0, "cutoff_j": 3, "dt": 1e-2, "t_end": 0.2},
        "randomization": {"family": "rademacher", "sample_index": 2},
        "output_dir": out,
        "seed": 21
    });
    let config = write_config(dir.path(), &doc);
    run_ok(wavelab().args(["remainder", "--config"]).arg(&config));
    let spec_file: wavelab::randomization::RandomizationSpecFile =
        serde_json::from_str(&std::fs::read_to_string(out.join("randomization.json")).unwrap()).unwrap();
    let spec = spec_file.resolve(&out).unwrap();
    assert_eq!(spec.base_seed, 21);
    // the remainder trace starts at exactly zero energy
    let trace = EnergyTrace::read_csv(std::fs::File::open(out.join("remainder_trace.csv")).unwrap()).unwrap();
    assert_eq!(trace.total(0), 0.0);
    assert!(trace.times.len() > 1);
}
