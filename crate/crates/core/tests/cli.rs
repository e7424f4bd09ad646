use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vlasov_fsl::diagnostics::{read_csv, CSV_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vlasov-fsl"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn vlasov-fsl")
}

fn small_run(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec![
        "run", "--case", "two_stream", "--nodes-x", "16", "--nv", "32", "--dt", "0.25", "--T", "2", "--out", out,
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn list_cases_names_every_case() {
    let o = run(&["list-cases"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["two_stream", "bump_on_tail", "free_streaming", "custom"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn run_writes_diagnostics_snapshots_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = small_run(dir.path(), &["--snapshot-times", "0,1.0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    let rows = read_csv(csv.as_bytes()).unwrap();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0].t, 0.0);
    assert_eq!(rows[8].t, 2.0);

    let snap = fs::read_to_string(dir.path().join("snapshot_001.txt")).unwrap();
    let mut lines = snap.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# t=1 Nx=15 Nv=32 L="), "{header}");
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 33);
    assert!(body.iter().all(|l| l.split_whitespace().count() == 16));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "run");
    assert_eq!(manifest["config"]["nodes_x"], 16);
    assert_eq!(manifest["parameter_sources"]["dt"], "user");
    assert_eq!(manifest["parameter_sources"]["k"], "paper");
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 4);
    for f in outputs {
        assert!(Path::new(f.as_str().unwrap()).exists(), "{f}");
    }
    assert!(manifest["artifact_defaults"]
        .as_array()
        .unwrap()
        .iter()
        .any(|k| k == "pusher"));
}

#[test]
fn bump_on_tail_manifest_flags_unpublished_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["run", "--case", "bump_on_tail", "--nodes-x", "16", "--nv", "32", "--T", "0.4", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let flagged: Vec<&str> = manifest["artifact_defaults"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(flagged.contains(&"k") && flagged.contains(&"alpha"), "{flagged:?}");
    assert_eq!(manifest["parameter_sources"]["alpha"], "artifact-default");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[case]\nname = \"free_streaming\"\n\n[grid]\nnodes_x = 16\nnv = 32\n\n[time]\ndt = 0.5\nt_final = 1.0\n\n[scheme]\npusher = \"ck3\"\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--dt", "0.25", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(fs::read_to_string(out.join("diagnostics.csv")).unwrap().as_bytes()).unwrap();
    assert_eq!(rows.len(), 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["pusher"], "ck3");
    assert_eq!(manifest["config"]["dt"], 0.25);
}

#[test]
fn unknown_config_key_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[case]\nname = \"two_stream\"\n\n[grid]\nnodes = 64\n").unwrap();
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nodes"));
}

#[test]
fn missing_case_and_invalid_values_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["run", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("case"));

    let o = run(&["run", "--case", "bump_on_tail", "--k", "0.25", "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["run", "--case", "two_stream", "--alpha", "-0.1", "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["run", "--case", "two_stream", "--pusher", "rk4", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_finite_state_exits_with_abort_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = small_run(dir.path(), &["--vmax", "1e200"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn same_configuration_gives_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let o = small_run(d, &[]);
        assert!(o.status.success());
    }
    let ca = fs::read(a.path().join("diagnostics.csv")).unwrap();
    let cb = fs::read(b.path().join("diagnostics.csv")).unwrap();
    assert_eq!(ca, cb);

    let c = tempfile::tempdir().unwrap();
    let o = bin()
        .env("VLASOV_FSL_THREADS", "1")
        .args(["run", "--case", "two_stream", "--nodes-x", "16", "--nv", "32", "--dt", "0.25", "--T", "2", "--out"])
        .arg(c.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read(c.path().join("diagnostics.csv")).unwrap(), ca);
}

#[test]
fn invalid_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("VLASOV_FSL_THREADS", "zero")
        .args(["list-cases"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    drop(dir);
}

#[test]
fn converge_writes_a_convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "converge", "--case", "free_streaming", "--ladder", "3", "--nodes-x", "16", "--nv", "64", "--out", out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "resolution,dx,dv,dt,l1_error,observed_order");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].ends_with(','));
    let order: f64 = lines[3].rsplit(',').next().unwrap().parse().unwrap();
    assert!(order > 1.0 && order < 1.7, "{order}");
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn converge_rejects_a_short_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["converge", "--case", "custom", "--ladder", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
