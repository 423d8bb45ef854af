use std::path::Path;
use std::process::{Command, Output};

use bld_kaporin::harness::synthetic::sparse_network;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bld-kaporin"))
        .args(args)
        .env_remove("BLD_KAPORIN_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_network(dir: &Path, n: usize) -> String {
    let path = dir.join("net.mtx");
    std::fs::write(&path, sparse_network(n, 5).unwrap().to_matrix_market()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn info_reports_order_and_spd() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_network(dir.path(), 40);
    let o = run(&["info", "--matrix", &m]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("n=40"));
    assert!(text.contains("diagonal_positive=true"));
    assert!(text.contains("spd=true"));
}

#[test]
fn sweep_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_network(dir.path(), 60);
    let out = dir.path().join("sweep.csv");
    let o = run(&[
        "sweep-alpha",
        "--matrix",
        &m,
        "--factor",
        "ic0",
        "--rank",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("alpha,kappa2,d_ld,ln_k\n"));
    assert!(csv.lines().count() > 101);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "sweep_alpha");
    assert!(summary["results"]["alpha_star"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn unknown_flag_is_usage_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = run(&["sweep-alpha", "--network", "30", "--bogus", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn missing_file_and_bad_values_are_usage_errors() {
    assert_eq!(run(&["info", "--matrix", "/no/such/file.mtx"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--network", "30", "--eps", "2"]).status.code(), Some(1));
    assert_eq!(run(&["precondition", "--network", "30", "--factor", "lu"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
}

#[test]
fn numeric_errors_exit_two() {
    // rank equal to the order leaves nothing to scale
    assert_eq!(run(&["precondition", "--network", "20", "--rank", "20"]).status.code(), Some(2));
    let o = run(&["precondition", "--synthetic-n", "10", "--spectrum", "explicit:1,2,3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn solve_is_deterministic_in_its_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path| {
        vec![
            "solve".to_string(),
            "--synthetic-n".into(),
            "80".into(),
            "--spectrum".into(),
            "geometric:1000".into(),
            "--factor".into(),
            "identity".into(),
            "--seed".into(),
            "3".into(),
            "--eps".into(),
            "1e-6".into(),
            "--out".into(),
            out.to_string_lossy().into_owned(),
        ]
    };
    for out in [&a, &b] {
        let argv = args(out);
        let o = run(&argv.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ta = std::fs::read_to_string(&a).unwrap();
    assert_eq!(ta, std::fs::read_to_string(&b).unwrap());
    assert!(ta.starts_with("k,rel_res_2,rel_res_pinv"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(report["results"]["converged"], true);
    assert_eq!(report["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn verify_passes_on_default_battery() {
    let o = run(&["verify", "--trials", "100", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("all_passed=true"));
}

#[test]
fn estimate_prints_estimates_and_threads_flag_is_accepted() {
    let o = run(&["--threads", "2", "estimate", "--network", "120", "--m", "30", "--nv", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("d_ld exact="));
}

#[test]
fn spec_file_drives_precondition() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"matrix": {"source": "network", "n": 50, "seed": 2}, "rank": 5}"#,
    )
    .unwrap();
    let out = dir.path().join("p.json");
    let o = run(&["precondition", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["results"]["rank"], 5);
    let (d, lnk) = (v["results"]["d_ld"].as_f64().unwrap(), v["results"]["ln_k"].as_f64().unwrap());
    assert!((d - lnk).abs() <= 1e-9 * d.abs());

    std::fs::write(&spec, "{not json").unwrap();
    assert_eq!(run(&["precondition", "--spec", spec.to_str().unwrap()]).status.code(), Some(1));
}
