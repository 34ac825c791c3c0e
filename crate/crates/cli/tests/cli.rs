use std::path::Path;
use std::process::{Command, Output};

fn otm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otm"))
        .args(args)
        .output()
        .expect("run otm")
}

fn otm_to_file(args: &[&str], out: &Path) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    otm(&all)
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn demo_recovers_each_basis() {
    let dir = tempfile::tempdir().unwrap();
    for basis in ["x", "z"] {
        let path = dir.path().join(format!("demo-{basis}.json"));
        let out = otm_to_file(&["demo", "--basis", basis, "--seed", "3"], &path);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.contains("recovered m_"), "{stdout}");
        let report: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
        assert_eq!(report["success"], true);
        assert_eq!(report["expected_hex"], report["recovered_hex"]);
        assert_eq!(report["params"]["n"], 8);
        assert!(report["token"]["obf_x"].is_string());
    }
}

#[test]
fn demo_reuse_reports_the_other_basis() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reuse.json");
    let out = otm_to_file(&["demo", "--basis", "z", "--reuse", "--seed", "4"], &path);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(report["reuse"]["basis"], "X");
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("reuse in basis X"));
}

#[test]
fn bound_sweep_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let args = [
        "bound-sweep",
        "--m",
        "1,2",
        "--restarts",
        "2",
        "--iterations",
        "300",
        "--seed",
        "5",
    ];
    let out = otm_to_file(&args, &path);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&path);
    assert_eq!(
        rows[0],
        [
            "m",
            "epsilon",
            "z_success",
            "x_guess",
            "bound",
            "converged",
            "seed"
        ]
    );
    assert_eq!(rows.len(), 19);
    let eps: Vec<&str> = rows[1..10].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(
        eps,
        [
            "0.010000", "0.040000", "0.070000", "0.100000", "0.130000", "0.160000", "0.190000",
            "0.220000", "0.250000"
        ]
    );
    for r in &rows[1..] {
        let x: f64 = r[3].parse().unwrap();
        let bound: f64 = r[4].parse().unwrap();
        assert!(x <= bound);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs_and_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &[
            "bound-sweep",
            "--m",
            "1",
            "--epsilon-grid",
            "0.02,0.2",
            "--restarts",
            "3",
            "--iterations",
            "200",
            "--seed",
            "9",
        ],
        &[
            "attack",
            "--strategy",
            "honest-x,breidbart,constant",
            "--trials",
            "150",
            "--seed",
            "9",
        ],
        &["obf-test", "--trials", "50", "--seed", "9"],
        &["demo", "--reuse", "--seed", "9"],
    ];
    for (k, args) in cases.iter().enumerate() {
        let a = dir.path().join(format!("{k}-a"));
        let b = dir.path().join(format!("{k}-b"));
        let mut serial: Vec<&str> = vec!["--jobs", "1"];
        serial.extend_from_slice(args);
        assert!(otm_to_file(args, &a).status.success(), "{args:?}");
        assert!(otm_to_file(&serial, &b).status.success(), "{args:?}");
        assert_eq!(
            std::fs::read(&a).unwrap(),
            std::fs::read(&b).unwrap(),
            "{args:?}"
        );
    }
}

#[test]
fn attack_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("attack.csv");
    let out = otm_to_file(
        &[
            "attack",
            "--strategy",
            "reader,honest-z",
            "--trials",
            "100",
            "--seed",
            "2",
        ],
        &path,
    );
    assert!(out.status.success());
    let rows = csv_rows(&path);
    assert_eq!(
        rows[0],
        [
            "strategy",
            "n",
            "m",
            "trials",
            "p_mx",
            "p_mz",
            "p_both",
            "mean_cov_conj",
            "tv_estimate",
            "seed"
        ]
    );
    let names: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["honest-z", "reader"]);
    assert_eq!(rows[1][5], "1.000000");
}

#[test]
fn obf_test_passes_at_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obf.csv");
    let out = otm_to_file(&["obf-test", "--trials", "100", "--seed", "1"], &path);
    assert!(out.status.success());
    let rows = csv_rows(&path);
    assert_eq!(rows[1][..7], ["512", "128", "64", "100", "100", "100", "0"]);
}

#[test]
fn exit_codes() {
    assert_eq!(
        otm(&[
            "attack",
            "--strategy",
            "psychic",
            "--trials",
            "1",
            "--seed",
            "1"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        otm(&["demo", "--n", "1", "--seed", "1"]).status.code(),
        Some(1)
    );
    assert_eq!(
        otm(&[
            "bound-sweep",
            "--epsilon-grid",
            "0.3:0.1:0.1",
            "--seed",
            "1"
        ])
        .status
        .code(),
        Some(1)
    );
    // clap usage errors, including a missing seed
    assert_eq!(otm(&["obf-test"]).status.code(), Some(2));
    assert!(!otm(&["no-such-command"]).status.success());
    assert!(otm(&["--help"]).status.success());
}
