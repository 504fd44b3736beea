use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fpam(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpam"))
        .args(args)
        .env("FPAM_OUT", out)
        .env("FPAM_THREADS", "1")
        .output()
        .unwrap()
}

fn shipped(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.json"))
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn kernels_validate_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = fpam(dir.path(), &["kernels-validate", "--config", &shipped("kernels-validate")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("identity checks passed"));
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn malformed_json_exits_two_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"spec\": [1, 2").unwrap();
    let out = dir.path().join("run");
    let o = fpam(&out, &["moment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn subcommand_and_config_must_agree() {
    let dir = tempfile::tempdir().unwrap();
    let o = fpam(dir.path(), &["moment", "--config", &shipped("lambda")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pipeline"));
}

#[test]
fn regime_mismatch_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = fpam(
        dir.path(),
        &["solve-variational", "--alpha", "1.0", "--beta0", "0.5", "--kernel", "riesz:0.6", "--grid", "32"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("regime"));
}

#[test]
fn solve_from_flags_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = fpam(
        dir.path(),
        &[
            "solve-variational", "--beta0", "0", "--kernel", "riesz:0", "--box", "4", "--grid", "16", "--slices", "2",
            "--restarts", "1", "--theta", "1", "--theta", "3",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = fpam(dir.path(), &["plot", "scaling"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("plot-scaling.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theta,M_estimate,predicted_ratio");
    assert_eq!(lines.len(), 3);
    let m3: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((m3 - 1.5).abs() < 1e-6);
}

#[test]
fn plot_without_records_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    fpam(dir.path(), &["kernels-validate", "--config", &shipped("kernels-validate")]);
    let o = fpam(dir.path(), &["plot", "lyapunov"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no lyapunov records"));
}

#[test]
fn seed_flag_reproduces_records() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = fpam(d.path(), &["exp-moment", "--config", &shipped("exp-moment"), "--seed", "5"]);
        assert!(o.status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("000-records.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}
