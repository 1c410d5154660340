//! End-to-end runs of the `lptlab` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const DDM: &str = r#"
seed = 3
[model]
kind = "ddm"
spin = 3
g = 1.0
kappa = 0.5
[sweep]
param = "kappa"
start = 0.2
stop = 2.0
points = 4
"#;

fn lptlab(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lptlab"));
    cmd.args(args).env_remove("LPTLAB_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run_ok(args: &[&str]) -> Output {
    let out = lptlab(args, &[]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn tasks_succeed_and_manifest_hashes_match() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ddm.toml", DDM);
    for task in ["spectrum", "steady", "meanfield", "sweep", "squeeze"] {
        let out = tmp.path().join(task);
        run_ok(&[task, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        let m = manifest(&out);
        assert_eq!(m["tool"], "lptlab");
        assert_eq!(m["task"], task);
        assert_eq!(m["seed"], 3);
        assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
        let files = m["files"].as_array().unwrap();
        assert!(!files.is_empty());
        let mut listed: Vec<String> = files.iter().map(|f| f["path"].as_str().unwrap().to_owned()).collect();
        for f in files {
            let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
            assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
            assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        }
        let mut on_disk: Vec<String> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n != "manifest.json")
            .collect();
        listed.sort();
        on_disk.sort();
        assert_eq!(listed, on_disk, "{task}");
    }
    let sweep = fs::read_to_string(tmp.path().join("sweep/sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(lines.next(), Some("param,gap,mz_x,mz_y,mz_z,purity,xi2_ku,xi2_w,infidelity_pt"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ddm.toml", DDM);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        run_ok(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        run_ok(&["meanfield", "--config", cfg.to_str().unwrap(), "--out", dir.join("mf").to_str().unwrap()]);
    }
    for f in ["sweep.csv", "mf/meanfield_fp.csv", "mf/trajectory.csv", "mf/meanfield.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(manifest(&a)["config_sha256"], manifest(&b)["config_sha256"]);
}

#[test]
fn seed_changes_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ddm.toml", DDM);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&["steady", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    run_ok(&["steady", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(manifest(&b)["seed"], 9);
    assert_ne!(manifest(&a)["config_sha256"], manifest(&b)["config_sha256"]);
}

#[test]
fn checkpoints_are_reused_then_removed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ddm.toml", DDM);
    let out = tmp.path().join("out");
    run_ok(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!out.join(".checkpoints").exists());
    let hash = manifest(&out)["config_sha256"].as_str().unwrap().to_owned();
    let first = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let row0: Vec<&str> = first.lines().nth(1).unwrap().split(',').collect();

    let ck = out.join(".checkpoints").join(format!("sweep-{}", &hash[..16]));
    fs::create_dir_all(&ck).unwrap();
    let planted = serde_json::json!({
        "param": 0.2, "gap": 123.5, "mz_x": null, "mz_y": null, "mz_z": null,
        "purity": 0.5, "xi2_ku": null, "xi2_w": null, "infidelity_pt": null
    });
    fs::write(ck.join("00000.json"), planted.to_string()).unwrap();
    run_ok(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let second = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(second.lines().nth(1).unwrap(), "0.2,123.5,,,,0.5,,,");
    assert_eq!(first.lines().skip(2).collect::<Vec<_>>(), second.lines().skip(2).collect::<Vec<_>>());
    assert_ne!(row0[1], "123.5");
    assert!(!out.join(".checkpoints").exists());
}

#[test]
fn thread_count_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ddm.toml", DDM);
    let out = tmp.path().join("t");
    let o = lptlab(&["steady", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[("LPTLAB_THREADS", "2")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(&out)["threads"], 2);
    let o = lptlab(
        &["steady", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "1"],
        &[("LPTLAB_THREADS", "2")],
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(&out)["threads"], 1);
    let o = lptlab(&["steady", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[("LPTLAB_THREADS", "many")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ddm.toml", DDM);
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["bogus", "--config", cfg.to_str().unwrap(), "--out", out],
        vec!["thirdq", "--config", cfg.to_str().unwrap(), "--out", out],
        vec!["spectrum", "--out", out],
        vec!["spectrum", "--config", "/nonexistent/x.toml", "--out", out],
        vec!["demo", "--name", "nope", "--out", out],
        vec!["--frobnicate"],
    ];
    for args in cases {
        assert_eq!(lptlab(&args, &[]).status.code(), Some(2), "{args:?}");
    }

    let mismatch = write_config(tmp.path(), "m.toml", &format!("task = \"steady\"\n{DDM}"));
    assert_eq!(lptlab(&["spectrum", "--config", mismatch.to_str().unwrap(), "--out", out], &[]).status.code(), Some(2));
    let unknown = write_config(tmp.path(), "u.toml", &format!("colour = 1\n{DDM}"));
    assert_eq!(lptlab(&["steady", "--config", unknown.to_str().unwrap(), "--out", out], &[]).status.code(), Some(2));
    let big = write_config(
        tmp.path(),
        "big.toml",
        "[model]\nkind = \"kerr\"\ndetuning = -10.0\nkerr = 10.0\npump = 8.0\ngamma = 1.0\nscale = 20.0\nfock_cutoff = 100\n[spectrum]\ndense_max_dim_sq = 100000000\n",
    );
    assert_eq!(lptlab(&["spectrum", "--config", big.to_str().unwrap(), "--out", out], &[]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "x.toml", "[model]\nkind = \"xxz\"\nn_sites = 3\nanisotropy = 0.5\ngamma = 0.0\n");
    let o = lptlab(&["steady", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
}

#[test]
fn quick_demos_run_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    for (args, file) in [
        (vec!["ising-ssb"], "ising.csv"),
        (vec!["demo", "--name", "xxz-crosshairs"], "xxz_crosshairs.json"),
        (vec!["figure", "--name", "figC1"], "xxz_sz_dynamics.csv"),
    ] {
        let out = tmp.path().join(file);
        let mut a = args.clone();
        a.extend(["--out", out.to_str().unwrap()]);
        run_ok(&a);
        assert!(out.join(file).exists(), "{file}");
    }
}
