use std::fs;
use std::process::Command;

fn mmwpc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mmwpc"))
}

fn write_spec(dir: &std::path::Path, e_min: &[f64], seeds: &[u64]) -> std::path::PathBuf {
    let spec = format!(
        r#"{{
  "scenario": {{"mode": "relay", "k": 2, "n": 2, "m": 2, "p_rf_tx_dbm": 28, "p_rf_node_dbm": 28,
               "sigma2_node_dbm": -80, "sigma2_rx_dbm": -80, "delta2_rx_dbm": -80, "e_min": 1e-7}},
  "sweep": {{"axis": "e_min", "values": {e_min:?}}},
  "seeds": {seeds:?},
  "outputs": "{}"
}}"#,
        dir.join("out").display()
    );
    let p = dir.join("spec.json");
    fs::write(&p, spec).unwrap();
    p
}

#[test]
fn sweep_writes_csv_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &[1e-8, 1e-7], &[0, 1]);
    let run = || {
        let out = mmwpc()
            .args(["sweep", "--spec"])
            .arg(&spec)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        fs::read_to_string(dir.path().join("out/results.csv")).unwrap()
    };
    let first = run();
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(
        lines[0],
        "sweep,seed,min_rate,tau,energy_1,energy_2,iters,ms"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("1e-8,0,"));
    assert_eq!(run(), first);
    assert!(dir.path().join("out/results.json").exists());
    assert!(dir.path().join("out/summary.csv").exists());
}

#[test]
fn infeasible_only_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &[1.0], &[0]);
    let out = mmwpc()
        .args(["sweep", "--spec"])
        .arg(&spec)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let csv = fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "1e0,0,,,0,");
}

#[test]
fn run_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &[1e-7], &[0]);
    let out = mmwpc()
        .args([
            "run",
            "--variant",
            "t_static",
            "--seeds",
            "3,4",
            "--emit",
            "csv",
            "--spec",
        ])
        .arg(&spec)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("t_static,3,"));
    assert!(dir.path().join("out/traces/t_static_4.json").exists());
    assert!(!dir.path().join("out/results.json").exists());
}

#[test]
fn errors_exit_with_one() {
    let out = mmwpc().args(["sweep"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = mmwpc().args(["run", "--seeds", "5..5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = mmwpc()
        .args(["sweep", "--spec", "/nonexistent/spec.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/spec.json"));
    let out = mmwpc()
        .args(["run", "--mode", "irs", "--variant", "t_f_static"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn complexity_prints_table_one_bases() {
    let out = mmwpc()
        .args(["complexity", "--profile", "full"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("58752"), "{text}");
    assert!(text.contains("2 M^2 (1+2K)"));
    let out = mmwpc()
        .args(["complexity", "--profile", "full", "--mode", "irs"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("6 M (N+K+1)") && text.contains(&(6 * 6 * 14).to_string()));
}
