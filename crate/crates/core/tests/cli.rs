use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratiolimit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn spectrum_writes_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("lazy-z.toml");
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--closed-form-compare"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(&dir.path().join("spectrum.json"));
    assert!((s["rhoHat"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert!(s["spread"].as_f64().is_some());
    assert!(s["mRange"].is_array());
    assert!(dir.path().join("ratio-tail.csv").exists());
}

#[test]
fn periodic_walk_is_a_precondition_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("periodic-z.toml");
    let o = run(&["kernel", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("aperiodicity required"));
}

#[test]
fn amenable_radical_is_the_whole_ball() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("lazy-z2.toml");
    let o = run(&["radical", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("flagged = entire tested ball"));
}

#[test]
fn closed_form_columns_on_free_group() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("free2.toml");
    let o = run(&["kernel", "--config", cfg.to_str().unwrap(), "--closed-form-compare"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.contains("closed_form") && header.contains("rel_error"));
}

#[test]
fn report_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("lazy-z.toml");
    let green = run(&["report", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&green), 0, "{}", String::from_utf8_lossy(&green.stdout));
    assert_eq!(read_json(&dir.path().join("summary.json"))["pass"], true);

    let red_dir = tempfile::tempdir().unwrap();
    let cfg = config("lazy-z2.toml");
    let red = run(&["kernel", "--config", cfg.to_str().unwrap(), "--tolerance", "0.0001"], red_dir.path());
    assert_eq!(code(&red), 1);
    assert!(String::from_utf8_lossy(&red.stdout).contains("FAIL"));
}

#[test]
fn shallow_depth_is_a_budget_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("lazy-z.toml");
    let o = run(&["fock", "--config", cfg.to_str().unwrap(), "--max-depth", "10"], dir.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_input_is_a_precondition_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "depth = 16\nhold = 1.5\n[group]\nfamily = \"lattice\"\ndim = 1\n").unwrap();
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    let missing = run(&["spectrum", "--config", "/nonexistent.toml"], dir.path());
    assert_eq!(code(&missing), 2);
    let cfg = config("lazy-z.toml");
    let flag = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--tolerance", "2"], dir.path());
    assert_eq!(code(&flag), 2);
}

#[test]
fn help_lists_exit_codes() {
    let o = Command::new(env!("CARGO_BIN_EXE_ratiolimit")).arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("Exit codes") && text.contains("3  budget"));
}

fn digest(dir: &Path) -> String {
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| e.file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut h = Sha256::new();
    for n in names {
        h.update(n.as_bytes());
        h.update(std::fs::read(dir.join(&n)).unwrap());
    }
    hex::encode(h.finalize())
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = config("free2.toml");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(code(&run(&["report", "--config", cfg.to_str().unwrap()], d.path())), 0);
    }
    let first = digest(a.path());
    assert_eq!(first, digest(b.path()));
    // a warm cache gives the same bytes
    assert_eq!(code(&run(&["report", "--config", cfg.to_str().unwrap()], a.path())), 0);
    assert_eq!(first, digest(a.path()));
}
