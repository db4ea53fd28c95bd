use std::path::Path;
use std::process::{Command, Output};

const SMALL_TOP: &str = r#"
k = [3.0]
eps = 1e-3
steps = 20

[system]
kind = "top"
j = 5
hbar = 1.0

[[initial]]
theta = 0.89
phi = 0.63
"#;

fn kickent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kickent")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn validate_config_prints_the_hash() {
    let out = kickent(&["validate-config", "--preset", "fig2a"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let hash = stdout.trim().strip_prefix("ok ").unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.bytes().all(|b| b.is_ascii_hexdigit()));
}

#[test]
fn invalid_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &SMALL_TOP.replace("j = 5", "j = -1"));
    let out = kickent(&["validate-config", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("j"));
}

#[test]
fn missing_config_file_exits_with_code_2() {
    let out = kickent(&["entropy", "--config", "/nonexistent/kickent.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_threads_is_a_config_error() {
    let out = kickent(&["entropy", "--preset", "fig1a", "--threads", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn husimi_rejects_rotor_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out = kickent(&["husimi", "--preset", "fig1b", "--out", &dir.path().display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn entropy_writes_series_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), SMALL_TOP);
    let out_dir = dir.path().join("out");
    let out = kickent(&[
        "entropy",
        "--config",
        &path,
        "--out",
        &out_dir.display().to_string(),
        "--threads",
        "1",
        "--plot-scripts",
    ]);
    let code = out.status.code();
    assert!(code == Some(0) || code == Some(4), "unexpected exit {code:?}");
    let series = std::fs::read_to_string(out_dir.join("entropy_k0_ic0.csv")).unwrap();
    let mut lines = series.lines();
    assert!(lines.next().unwrap().starts_with("# config_sha256 "));
    assert_eq!(lines.next().unwrap(), "t,S_exact,S_pt");
    assert_eq!(lines.count(), 21);
    assert!(out_dir.join("entropy_summary.json").exists());
    assert!(out_dir.join("plot_entropy.py").exists());
}

#[test]
fn rate_sweep_writes_one_row_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL_TOP.replace("k = [3.0]", "k = [3.0, 6.0]").replace("steps = 20", "steps = 60");
    let path = write_config(dir.path(), &cfg);
    let out = kickent(&["rate-sweep", "--config", &path, "--out", &dir.path().display().to_string()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("rate_sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 2 + 2);
}
