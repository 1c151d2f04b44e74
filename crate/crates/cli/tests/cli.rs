use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_harvest-opt"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bundled(name: &str) -> PathBuf {
    configs_dir().join(name)
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    if !out.status.success() {
        eprintln!("stdout: {}", String::from_utf8_lossy(&out.stdout));
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Copy of a bundled config with some lines replaced, written into `dir`.
fn derived(dir: &Path, name: &str, replace: &[(&str, &str)]) -> PathBuf {
    let mut text = std::fs::read_to_string(bundled(name)).unwrap();
    for (from, to) in replace {
        assert!(text.contains(from), "{name} lacks `{from}`");
        text = text.replace(from, to);
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn every_bundled_config_validates() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("cfg") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let table: toml::Table = toml::from_str(&text).unwrap();
        assert!(table.contains_key("mode"), "{} has no mode", path.display());
        seen += 1;
    }
    assert_eq!(seen, 6);
}

#[test]
fn simulate_then_classify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("simulate.cfg");
    let out = run_in(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let series = dir.path().join("results/simulate_series.csv");
    let text = std::fs::read_to_string(&series).unwrap();
    assert!(text.starts_with("t,x,xdot,v\n"));
    assert_eq!(text.lines().count(), 250_002);
    let res = json(&dir.path().join("results/simulate_result.json"));
    assert!(res["power"].as_f64().unwrap() > 0.0);

    let out = run_in(dir.path(), &["classify", series.to_str().unwrap(), "--stride", "100", "--seed", "3"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    let k: f64 = lines.next().unwrap().trim_start_matches("# K = ").parse().unwrap();
    assert!((-1.0..=1.0).contains(&k));
    lines.next();
    assert_eq!(lines.next(), Some("c,k_c"));
    assert_eq!(lines.count(), 100);
}

#[test]
fn excitation_ce_bundled_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("excitation_ce.cfg");
    let out = run_in(dir.path(), &["ce", "--config", cfg.to_str().unwrap(), "--workers", "2"]);
    assert!(out.status.success());
    let res = json(&dir.path().join("results/excitation_ce_result.json"));
    assert_eq!(res["mode"], "ce");
    assert_eq!(res["seed"], 1);
    assert_eq!(res["variables"], serde_json::json!(["f", "omega"]));
    let x = res["optimum"].as_array().unwrap();
    assert!((0.08..=0.1).contains(&x[0].as_f64().unwrap()));
    let levels = res["levels"].as_u64().unwrap();
    assert_eq!(res["evaluations"].as_u64().unwrap(), 50 * levels);
    let trace = std::fs::read_to_string(dir.path().join("results/excitation_ce_trace.csv")).unwrap();
    assert!(trace.starts_with("level,P,K,mu_1,mu_2,sigma_1,sigma_2\n"));
    assert_eq!(trace.lines().count() as u64, levels + 1);
}

#[test]
fn excitation_ce_noisy_bundled_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = derived(dir.path(), "excitation_ce_noisy.cfg", &[("n_samples = 50", "n_samples = 20\nmax_levels = 3")]);
    let out = run_in(dir.path(), &["ce", "--config", cfg.to_str().unwrap(), "--out", "noisy"]);
    assert!(out.status.success());
    let res = json(&dir.path().join("noisy_result.json"));
    assert_eq!(res["noise_ratio"], 0.05);
    assert_eq!(res["levels"], 3);
    assert_eq!(res["evaluations"], 60);
}

#[test]
fn excitation_grid_bundled_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = derived(dir.path(), "excitation_grid.cfg", &[("resolution = [64, 64]", "resolution = [4, 3]")]);
    let out = run_in(dir.path(), &["grid", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success() || out.status.code() == Some(2), "unexpected exit {:?}", out.status);
    if out.status.success() {
        let res = json(&dir.path().join("results/excitation_grid_result.json"));
        assert_eq!(res["evaluations"], 12);
        assert_eq!(res["resolution"], serde_json::json!([4, 3]));
        let field = std::fs::read_to_string(dir.path().join("results/excitation_grid_field.csv")).unwrap();
        assert!(field.starts_with("x_1,x_2,P,K\n"));
        assert_eq!(field.lines().count(), 13);
    }
}

#[test]
fn device_ce_bundled_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("device_ce.cfg");
    let out = run_in(dir.path(), &["ce", "--config", cfg.to_str().unwrap(), "--out", "d/run"]);
    assert!(out.status.success());
    let res = json(&dir.path().join("d/run_result.json"));
    assert_eq!(res["variables"], serde_json::json!(["xi", "chi", "lambda", "kappa"]));
    assert!(res["power"].as_f64().unwrap() > 0.05);
    assert_eq!(res["converged"], true);
}

#[test]
fn device_grid_bundled_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = derived(dir.path(), "device_grid.cfg", &[("resolution = [8, 8, 8, 8]", "resolution = [2, 2, 2, 2]")]);
    let out = run_in(dir.path(), &["grid", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let res = json(&dir.path().join("results/device_grid_result.json"));
    assert_eq!(res["evaluations"], 16);
    let field = std::fs::read_to_string(dir.path().join("results/device_grid_field.csv")).unwrap();
    assert_eq!(field.lines().next(), Some("x_1,x_2,x_3,x_4,P,K"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    std::fs::write(&cfg, "mode = \"ce\"\nseed = 1\n[ce]\nn_samples = 10\nmax_levels = 2\n").unwrap();
    let c = cfg.to_str().unwrap();
    for (seed, out) in [("7", "a"), ("7", "b")] {
        assert!(run_in(dir.path(), &["ce", "--config", c, "--seed", seed, "--out", out]).status.success());
    }
    let (a, b) = (json(&dir.path().join("a_result.json")), json(&dir.path().join("b_result.json")));
    assert_eq!(a["seed"], 7);
    assert_eq!(a["optimum"], b["optimum"]);
    assert_eq!(
        std::fs::read(dir.path().join("a_trace.csv")).unwrap(),
        std::fs::read(dir.path().join("b_trace.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "[ce]\nn_samples = 10\nn_elite = 10\n").unwrap();
    let out = run_in(dir.path(), &["ce", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let grid_cfg = bundled("excitation_grid.cfg");
    let out = run_in(dir.path(), &["ce", "--config", grid_cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "mode mismatch");

    let out = run_in(dir.path(), &["ce", "--config", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run_in(dir.path(), &["simulate", "--noise=-1"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run_in(dir.path(), &["ce", "--workers", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["classify", "nowhere.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let short = dir.path().join("short.csv");
    std::fs::write(&short, "1\n2\n3\n").unwrap();
    let out = run_in(dir.path(), &["classify", short.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = dir.path().join("blowup.cfg");
    std::fs::write(&cfg, "mode = \"simulate\"\n[params]\nxi = -5.0\n").unwrap();
    let out = run_in(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
