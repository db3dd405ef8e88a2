use std::path::Path;
use std::process::{Command, Output};

use ptspectra::cli::{EpOutput, RunConfig, SolveOutput, SweepOutput, SWEEP_HEADER};
use ptspectra::sweep::{run_sweep, sweep_rows, SweepPlan};

const DOUBLET: &str = r#"{
    "spec": {"family": "double_delta", "u": 2.0, "g": 1.0, "a": 0.6},
    "axis": "a",
    "grid": {"from": 0.6, "to": 2.0, "n": 29},
    "rect": {"re": [-3.0, -0.01], "im": [-1.5, 1.5]},
    "n_levels": 2
}"#;

fn ptspectra(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ptspectra"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn sweep_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", DOUBLET);
    let out = ptspectra(&["sweep"], Some(&cfg));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(SWEEP_HEADER));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 7);
    assert_eq!(first[0], "6.000000000000e-01");
    assert!(matches!(first[5], "real" | "conjugate_pair_member"));
    let trailer = text.lines().last().unwrap();
    assert!(
        trailer.starts_with("# transition {\"kind\":\"coalescing\""),
        "{trailer}"
    );
}

#[test]
fn sweep_json_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", DOUBLET);
    let out = ptspectra(&["sweep", "--format", "json"], Some(&cfg));
    assert_eq!(out.status.code(), Some(0));
    let parsed: SweepOutput = serde_json::from_slice(&out.stdout).unwrap();

    let config: RunConfig = serde_json::from_str(DOUBLET).unwrap();
    let plan = SweepPlan {
        spec_template: config.spec.unwrap(),
        axis: config.axis.unwrap(),
        grid: config.grid.unwrap().values(),
        region: config.rect.unwrap(),
        n_levels: 2,
        root: Default::default(),
        scan: Default::default(),
        shooting: Default::default(),
    };
    let branches = run_sweep(&plan).unwrap();
    let rows = sweep_rows(&branches, &plan.grid, plan.root.real_axis_tol);
    assert_eq!(parsed.rows, rows);
    assert_eq!(parsed.meta.config_hash.len(), 64);
    assert_eq!(parsed.meta.version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn ep_reports_the_coalescence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", DOUBLET);
    let out = ptspectra(&["ep"], Some(&cfg));
    assert_eq!(out.status.code(), Some(0));
    let ep: EpOutput = serde_json::from_slice(&out.stdout).unwrap();
    assert!(
        (ep.param_star - 0.93133396).abs() < 1e-6,
        "{}",
        ep.param_star
    );
    assert!((ep.param_star - ep.lambda_bisect.unwrap()).abs() < 1e-6);
    assert!((ep.splitting_exponent - 0.5).abs() < 0.1);
}

#[test]
fn ep_without_coalescence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let hermitian = DOUBLET
        .replace("\"g\": 1.0", "\"g\": 0.0")
        .replace("\"to\": 2.0", "\"to\": 6.0");
    let cfg = write_config(dir.path(), "c.json", &hermitian);
    let out = ptspectra(&["ep"], Some(&cfg));
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("merging"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(
        dir.path(),
        "a.json",
        r#"{"spec": {"family": "linear_pt", "g": 0.5}, "bogus": 1}"#,
    );
    assert_eq!(ptspectra(&["solve"], Some(&unknown)).status.code(), Some(2));
    let malformed = write_config(dir.path(), "b.json", "{ not json");
    assert_eq!(
        ptspectra(&["solve"], Some(&malformed)).status.code(),
        Some(2)
    );
    let invalid = write_config(
        dir.path(),
        "c.json",
        r#"{"spec": {"family": "double_delta", "u": -1.0, "g": 0.0, "a": 1.0}, "rect": {"re": [-3, -0.1], "im": [-1, 1]}}"#,
    );
    assert_eq!(ptspectra(&["solve"], Some(&invalid)).status.code(), Some(2));
    assert_eq!(
        ptspectra(&["solve"], Some(&dir.path().join("missing.json")))
            .status
            .code(),
        Some(2)
    );
    assert_eq!(ptspectra(&["solve"], None).status.code(), Some(2));
    assert_eq!(ptspectra(&["frobnicate"], None).status.code(), Some(2));
}

#[test]
fn empty_first_point_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let empty = DOUBLET.replace("\"re\": [-3.0, -0.01]", "\"re\": [-30.0, -20.0]");
    let cfg = write_config(dir.path(), "c.json", &empty);
    assert_eq!(ptspectra(&["sweep"], Some(&cfg)).status.code(), Some(3));
}

#[test]
fn solve_and_oracle_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"spec": {"family": "double_delta", "u": 2.0, "g": 1.0, "a": 6.0},
            "rect": {"re": [-3.0, -0.1], "im": [-2.0, 2.0]},
            "scan": {"n_real": 600, "nx": 80, "ny": 41}}"#,
    );
    let solve: SolveOutput =
        serde_json::from_slice(&ptspectra(&["solve", "--format", "json"], Some(&cfg)).stdout)
            .unwrap();
    let oracle: SolveOutput =
        serde_json::from_slice(&ptspectra(&["oracle", "--format", "json"], Some(&cfg)).stdout)
            .unwrap();
    assert_eq!(solve.rows.len(), 2);
    assert_eq!(oracle.rows.len(), 2);
    for r in &solve.rows {
        assert_eq!(r.classification, "conjugate_pair_member");
        assert!(oracle
            .rows
            .iter()
            .any(|o| (o.re_e - r.re_e).hypot(o.im_e - r.im_e) < 5e-4));
    }
    assert_eq!(solve.meta.config_hash, oracle.meta.config_hash);
}

#[test]
fn figure_writes_per_sweep_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("fig3");
    let out = ptspectra(
        &[
            "figure",
            "--preset",
            "fig3",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let mut names: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "fig3_double_delta_g0.1.csv",
            "fig3_double_delta_g0.csv",
            "fig3_double_delta_g1.csv",
            "fig3_meta.json"
        ]
    );
}
