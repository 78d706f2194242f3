use std::fs;
use std::process::Command;

fn pathlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pathlab"))
}

fn run(dir: &std::path::Path, config: &str, overrides: &[&str]) -> (i32, String) {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    let mut cmd = pathlab();
    cmd.arg("run").arg(&cfg).env("PATHLAB_OUTPUT_DIR", dir);
    for o in overrides {
        cmd.arg("--set").arg(o);
    }
    let out = cmd.output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn jacobian_check_json() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(
        dir.path(),
        r#"{"command": "jacobian-check", "lattice": {"N": 6}, "format": "JSON"}"#,
        &[],
    );
    assert_eq!(code, 0, "{err}");
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("jacobian-check.json")).unwrap()).unwrap();
    let det = doc["result"]["det"].as_f64().unwrap();
    assert!((det - 1.0).abs() < 1e-6);
    assert_eq!(doc["result"]["tolerance_pass"], true);

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("jacobian-check.json.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["seed"], 42);
    assert_eq!(meta["spec"]["lattice"]["N"], 6);
    assert!(meta["timestamp_unix"].as_u64().is_some());
}

#[test]
fn equivalence_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"command": "equivalence", "params": {"hbar": 0.1}, "lattice": {"N": 16},
                     "sampler": {"n_samples": 20000, "proposal_width": 0.08}}"#;
    let (code, err) = run(dir.path(), config, &[]);
    assert!(code == 0 || code == 2, "{err}");
    let first = fs::read_to_string(dir.path().join("equivalence.csv")).unwrap();
    let (code2, _) = run(dir.path(), config, &[]);
    assert_eq!(code, code2);
    let second = fs::read_to_string(dir.path().join("equivalence.csv")).unwrap();
    assert_eq!(first, second);

    let mut rdr = csv::Reader::from_reader(first.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["observable", "mean_mapped", "stderr_mapped", "mean_metropolis", "stderr_metropolis", "z", "pass"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    // 17 significant digits.
    let mean = &rows[0][1];
    assert_eq!(mean.split('e').next().unwrap().replace(['-', '.'], "").len(), 17);
}

#[test]
fn classical_limit_rows_per_hbar() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("sweep").join("limit.csv");
    let set = format!("output_path={}", target.display());
    let (code, err) = run(
        dir.path(),
        r#"{"command": "classical-limit", "lattice": {"N": 16}, "sampler": {"n_samples": 20000},
            "hbar_list": [0.2, 0.1, 0.05]}"#,
        &[&set],
    );
    assert!(code == 0 || code == 2, "{err}");
    let text = fs::read_to_string(&target).unwrap();
    assert!(dir.path().join("sweep").join("limit.csv.meta.json").exists());
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "hbar,rms_dev_from_kink,max_el7_residual,mean_el9_residual,n_blowups"
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn failed_experiment_still_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(dir.path(), r#"{"command": "bvp"}"#, &[]);
    assert_eq!(code, 2);
    assert!(err.contains("no bracketed root"), "{err}");
    let text = fs::read_to_string(dir.path().join("bvp.csv")).unwrap();
    assert!(text.starts_with("error"));
    let meta = fs::read_to_string(dir.path().join("bvp.csv.meta.json")).unwrap();
    assert!(meta.contains("\"passed\": false"));
}

#[test]
fn operational_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(dir.path(), r#"{"command": "equivalence", "lattice": {"N": 0}}"#, &[]);
    assert_eq!(code, 1);
    assert!(err.contains("lattice.N"), "{err}");

    let (code, err) = run(dir.path(), "{\"command\": ", &[]);
    assert_eq!(code, 1);
    assert!(err.contains("line 1"), "{err}");

    let out = pathlab().args(["run", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn overrides_and_kink() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(
        dir.path(),
        r#"{"command": "kink"}"#,
        &["format=JSON", "lattice.N=64"],
    );
    assert_eq!(code, 0, "{err}");
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("kink.json")).unwrap()).unwrap();
    assert_eq!(doc["result"]["kind"], "TANH");
    assert_eq!(doc["result"]["phi"].as_array().unwrap().len(), 65);
    let gap = doc["result"]["action_gap"].as_f64().unwrap();
    let lattice_gap = doc["result"]["odd_gap_on_lattice"].as_f64().unwrap();
    assert!((gap - lattice_gap).abs() < 1e-10);

    let (code, err) = run(dir.path(), r#"{"command": "kink", "alpha": 2.0, "format": "JSON"}"#, &[]);
    assert_eq!(code, 0, "{err}");
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("kink.json")).unwrap()).unwrap();
    assert_eq!(doc["result"]["kind"], "COTH");
}

#[test]
fn ito_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(
        dir.path(),
        r#"{"command": "ito-check", "sampler": {"n_samples": 2000}}"#,
        &[],
    );
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(dir.path().join("ito-check.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
}
