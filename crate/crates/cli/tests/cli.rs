use std::path::Path;
use std::process::{Command, Output};

use heatrm_cli::commands::echoed_config;
use heatrm_cli::RunConfig;

fn heatrm(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_heatrm"));
    cmd.args(args);
    if let Some(path) = config {
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &tempfile::TempDir, text: &str) -> std::path::PathBuf {
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn data_rows(stdout: &[u8]) -> Vec<String> {
    String::from_utf8_lossy(stdout)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_owned)
        .collect()
}

#[test]
fn zero_diffusivity_keeps_every_row_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "diffusivity = 0\nintervals = 8\nsteps = 6\n");
    let out = heatrm(&["solve"], Some(&cfg));
    assert!(out.status.success());
    let rows = data_rows(&out.stdout);
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| *r == rows[0]));
}

#[test]
fn header_carries_hash_seed_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "intervals = 12\nt_end = 0.05\nseed = 99\n");
    let out = heatrm(&["solve"], Some(&cfg));
    let text = String::from_utf8(out.stdout).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# heatrm solve config_hash="));
    assert!(first.ends_with(" seed=99"));

    let echoed = echoed_config(&text).unwrap();
    let original = RunConfig::parse(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    assert_eq!(echoed, original);
    assert!(first.contains(&format!("config_hash={} ", original.hash())));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "seed = 5\nrecursion_k = 20\n");
    let out = heatrm(&["recursion-check", "--seed", "17"], Some(&cfg));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().ends_with("seed=17"));
    assert_eq!(echoed_config(&text).unwrap().seed, 17);
}

#[test]
fn recursion_check_agrees_to_rounding() {
    let out = heatrm(&["recursion-check"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let dev: f64 = text.lines().last().unwrap().strip_prefix("max_deviation=").unwrap().parse().unwrap();
    assert!(dev <= 1e-10);
}

#[test]
fn bounds_rows_all_hold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "k_max = 300\n");
    let out = heatrm(&["bounds"], Some(&cfg));
    assert!(out.status.success());
    let rows = data_rows(&out.stdout);
    assert_eq!(rows.len(), 300);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("product_bound_holds=true sum_bound_holds=true"));
}

#[test]
fn order_writes_file_with_four_levels() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("order.csv");
    let out = heatrm(&["order", "--out", csv.to_str().unwrap()], None);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().any(|l| l == "dx,dt,err,ratio"));
    assert_eq!(data_rows(text.as_bytes()).len(), 4);
}

#[test]
fn bad_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "intervals = 10\n# note\nnot_a_key = 3\n");
    let out = heatrm(&["solve"], Some(&cfg));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let cfg = write_config(&dir, "steps = many\n");
    let out = heatrm(&["solve"], Some(&cfg));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = heatrm(&["frobnicate"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn rm_solver_flag_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "steps = 2\nt_end = 0.02\nrm_iters = 200000\nnoise = zero\n");
    let direct = heatrm(&["solve"], Some(&cfg));
    let rm = heatrm(&["solve", "--solver", "rm"], Some(&cfg));
    assert!(direct.status.success() && rm.status.success());
    assert_eq!(echoed_config(&String::from_utf8_lossy(&rm.stdout)).unwrap().solver, heatrm_cli::config::SolverSel::Rm);
    let parse = |o: &Output| -> Vec<f64> {
        data_rows(&o.stdout).last().unwrap().split(',').map(|v| v.parse().unwrap()).collect()
    };
    let (a, b) = (parse(&direct), parse(&rm));
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-4));
}
