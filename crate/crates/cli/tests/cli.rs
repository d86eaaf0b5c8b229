use std::fs;
use std::process::Command;

fn pdtc() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pdtc"));
    c.env("RUST_LOG", "warn");
    c
}

const SMALL: &str = "name = \"small\"\nkind = \"run\"\n[graph]\nn_spins = 4\nn_samples = 2\n[schedule]\ncycles = 3\n";

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("run");
    let st = pdtc()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--workers", "1"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(out.join("manifest.toml").exists());
    let rep = pdtc().arg("report").arg("--out").arg(&out).output().unwrap();
    assert_eq!(rep.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&rep.stdout).contains("ac_on"));
}

#[test]
fn bad_tau_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, format!("{SMALL}tau = -1.0\n")).unwrap();
    let st = pdtc().args(["run", "-c"]).arg(&cfg).arg("-o").arg(dir.path().join("r")).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stderr).contains("tau"));
}

#[test]
fn wrong_subcommand_for_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SMALL).unwrap();
    let st = pdtc().args(["dome", "-c"]).arg(&cfg).arg("-o").arg(dir.path().join("r")).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stderr).contains("kind"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let st = pdtc().args(["sweep", "-c", "/nonexistent.toml", "-o", "/tmp/x"]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
}

#[test]
fn report_on_empty_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let st = pdtc().arg("report").arg("--out").arg(dir.path()).output().unwrap();
    assert_ne!(st.status.code(), Some(0));
}
