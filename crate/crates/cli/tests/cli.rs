//! End-to-end runs of the `smap` binary.

use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Runs `smap <cmd> --out <out> [--config <cfg>] --override ...` and returns the exit code.
fn smap(cmd: &str, out: &Path, config: Option<&str>, overrides: &[&str]) -> i32 {
    let mut c = Command::new(env!("CARGO_BIN_EXE_smap"));
    c.arg(cmd).arg("--out").arg(out);
    if let Some(name) = config {
        c.arg("--config").arg(configs().join(name));
    }
    for o in overrides {
        c.arg("--override").arg(o);
    }
    let output = c.output().expect("binary runs");
    output.status.code().expect("exit code")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Header and numeric rows of a CSV written by the CLI, after the hash line.
fn csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().skip(1);
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = csv(path);
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i]).collect()
}

fn every_file_carries_the_hash(dir: &Path) {
    let m = manifest(dir);
    let hash = m["config_hash"].as_str().unwrap();
    for f in m["files"].as_array().unwrap() {
        let text = fs::read_to_string(dir.join(f.as_str().unwrap())).unwrap();
        assert_eq!(text.lines().next().unwrap(), format!("# config_hash={hash}"), "{f}");
    }
}

#[test]
fn profiles_write_layers_and_matching_report() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("p");
    assert_eq!(smap("profiles", &out, None, &["nu=1.5", "alpha0=0", "delta=0.2", "order_n=1"]), 0);
    every_file_carries_the_hash(&out);
    assert_eq!(csv(&out.join("inner/z1.csv")).0, ["rho", "re_z1", "im_z1"]);
    assert_eq!(csv(&out.join("selfsim/W_0_0.csv")).0, ["y", "re_W00", "im_W00"]);
    assert!(out.join("selfsim/W_0_1.csv").exists());
    let m = manifest(&out);
    let r = &m["results"];
    assert!(r["a0"].is_array() && r["b0"].is_array() && r["beta0"].is_array() && r["beta1"].is_array());
    assert_eq!(r["overlap"].as_array().unwrap().len(), 4);
    assert!(m["files"].as_array().unwrap().iter().any(|f| f.as_str().unwrap().starts_with("remote/g_k1")));
}

#[test]
fn invalid_parameters_exit_with_the_config_code() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(smap("profiles", &out, None, &["nu=0.5"]), 2);
    assert_eq!(smap("profiles", &out, None, &["eps2=0.6"]), 2);
    assert_eq!(smap("profiles", &out, None, &["no_such_key=1"]), 2);
    assert_eq!(smap("profiles", &out, None, &["order_n=two"]), 2);
    assert_eq!(smap("residual", &out, None, &["residual.points=0"]), 2);
    assert_eq!(smap("evolve", &out, None, &["evolve.direction=backward", "evolve.duration=0.2"]), 2);
    assert!(!out.exists());
}

#[test]
fn io_failures_exit_with_the_io_code() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(smap("match", tmp.path(), Some("missing.conf"), &[]), 4);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    assert_eq!(smap("match", &blocker.join("out"), None, &[]), 4);
}

#[test]
fn residual_ladder_reports_slopes_for_both_orders() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("r");
    assert_eq!(smap("residual", &out, None, &["order_n=1", "residual.t0=0.01", "residual.points=6", "residual.dump_un=true"]), 0);
    every_file_carries_the_hash(&out);
    let (header, rows) = csv(&out.join("residual.csv"));
    assert_eq!(header, ["t", "L2", "H1", "weightedL2"]);
    assert_eq!(rows.len(), 6);
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r[0], 0.01 * 0.5f64.powi(k as i32));
    }
    assert_eq!(column(&out.join("slopes.csv"), "order_n"), [1.0, 2.0]);
    assert_eq!(column(&out.join("u_n.csv"), "r")[0], 0.0);
    let m = manifest(&out);
    assert!(m["results"]["slope"].is_f64());
    let first = &m["results"]["ladder"][0];
    for k in ["t", "N", "L2", "H1", "weightedL2"] {
        assert!(first.get(k).is_some(), "{k}");
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(smap("match", out, None, &["match.points=3"]), 0);
        assert_eq!(smap("evolve", &out.join("e"), Some("constant.conf"), &[]), 0);
    }
    for f in ["match.csv", "manifest.json", "e/evolve.csv", "e/final.csv", "e/manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    assert_eq!(smap("match", &c, None, &["match.points=3", "alpha0=0.2"]), 0);
    assert_ne!(manifest(&a)["config_hash"], manifest(&c)["config_hash"]);
}

#[test]
fn constant_map_has_flat_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("c");
    assert_eq!(smap("evolve", &out, Some("constant.conf"), &[]), 0);
    every_file_carries_the_hash(&out);
    let csv_path = out.join("evolve.csv");
    for name in ["energy", "degree", "prox_H1", "prox_wL2"] {
        assert!(column(&csv_path, name).iter().all(|&x| x == 0.0), "{name}");
    }
    assert!(fs::read_to_string(out.join("evolve.gp")).unwrap().contains("'evolve.csv'"));
}

#[test]
fn harmonic_map_stays_put() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("h");
    assert_eq!(smap("evolve", &out, Some("phi_stationary.conf"), &[]), 0);
    let prox = column(&out.join("evolve.csv"), "prox_H1");
    assert!(prox.len() > 5);
    let worst = prox.iter().cloned().fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst:e}");
}

#[test]
fn trajectory_run_reports_a_lambda_slope() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("t");
    assert_eq!(smap("evolve", &out, Some("trajectory.conf"), &["evolve.duration=0.005"]), 0);
    let m = manifest(&out);
    let r = &m["results"];
    assert!(r["lambda_slope"].as_f64().unwrap().is_finite());
    assert_eq!(r["lambda_slope_target"].as_f64().unwrap(), -2.0);
    assert!(r.get("reach").is_some());
    assert_eq!(r["dt_policy"]["kind"], "spacing_fraction");
    let prox = column(&out.join("evolve.csv"), "prox_H1");
    assert_eq!(prox[0], 0.0);
    assert!(prox[1..].iter().all(|&x| x > 0.0 && x.is_finite()));
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    assert_eq!(smap("sweep", &out, Some("sweep_nu.conf"), &["match.points=3"]), 0);
    let runs = manifest(&out)["runs"].as_array().unwrap().clone();
    assert_eq!(runs.len(), 4);
    for (run, nu) in runs.iter().zip([1.5, 2.0, 2.5, 3.0]) {
        let dir = out.join(run["dir"].as_str().unwrap());
        let m = manifest(&dir);
        assert_eq!(m["config"]["nu"].as_str().unwrap().parse::<f64>().unwrap(), nu);
        assert_eq!(m["config_hash"], run["config_hash"]);
        let slope = m["results"]["lambda_slope"].as_f64().unwrap();
        assert!((slope + 0.5 + nu).abs() < 1e-2, "{nu}: {slope}");
    }
    assert_eq!(smap("sweep", &tmp.path().join("bad"), Some("sweep_nu.conf"), &["sweep.values=2,0.5"]), 2);
}
