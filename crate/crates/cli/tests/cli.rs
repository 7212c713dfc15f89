use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stdiff"));
    c.env_remove("STDIFF_PRECISION_CAP");
    c
}

fn rule(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../rules").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("spawn stdiff")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("bad stdout ({e}): {}\nstderr: {}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
    })
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

/// `(file, sha256)` pairs, manifest excluded.
fn checksums(dir: &Path) -> Vec<(String, String)> {
    manifest(dir)["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (a["file"].as_str().unwrap().to_string(), a["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn dp_check_examples() {
    let t = tempfile::tempdir().unwrap();
    let cantor = rule("cantor.json");
    let o = run(&["dp-check", "--rule", cantor.to_str().unwrap(), "--horizon", "20"], &t.path().join("a"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let id = rule("identity.json");
    let o = run(&["dp-check", "--rule", id.to_str().unwrap(), "--horizon", "2"], &t.path().join("b"));
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["summary"]["failing_pair"], serde_json::json!([2, 1]));

    let o = run(&["dp-check", "--finite", "Z2", "--mode", "refute"], &t.path().join("c"));
    assert_eq!(code(&o), 0);
    let s = stdout_json(&o);
    assert!(s["summary"]["refuted_at"].as_u64().unwrap() <= 3);
    assert!(t.path().join("c/dp_report.json").exists());
}

#[test]
fn std_emits_seven_dyadic_rows() {
    let t = tempfile::tempdir().unwrap();
    let d = rule("doubling.json");
    let out = t.path().join("std");
    let o = run(&["std", "--rule", d.to_str().unwrap(), "--f", "char:1", "--kmax", "64"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("std.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "run_id,k,r_k,alpha_re,alpha_im,time_avg_re,time_avg_im,target_re,target_im,mc_ci"
    );
    let ks: Vec<usize> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(ks, vec![1, 2, 4, 8, 16, 32, 64]);
}

#[test]
fn manifest_lists_every_artifact() {
    let t = tempfile::tempdir().unwrap();
    let d = rule("doubling.json");
    let out = t.path().join("w");
    let o = run(
        &["weyl", "--rule", d.to_str().unwrap(), "--kmax", "256", "--points", "4", "--variance-samples", "20"],
        &out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut listed: Vec<String> = checksums(&out).into_iter().map(|(f, _)| f).collect();
    listed.sort();
    let mut on_disk: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|f| f != "manifest.json")
        .collect();
    on_disk.sort();
    assert_eq!(listed, on_disk);
    for (f, sum) in checksums(&out) {
        assert_eq!(stdiff_core::report::sha256_file(&out.join(&f)).unwrap(), sum, "{f}");
    }
}

#[test]
fn same_config_and_seed_reproduce_checksums() {
    let t = tempfile::tempdir().unwrap();
    let d = rule("doubling.json");
    let base = ["std", "--rule", d.to_str().unwrap(), "--kmax", "32", "--centers", "per-k"];
    let args: Vec<&str> = base.iter().copied().chain(["--seed", "7"]).collect();
    let a = t.path().join("a");
    let b = t.path().join("b");
    assert_eq!(code(&bin().args(&args).args(["--jobs", "1"]).arg("--out").arg(&a).output().unwrap()), 0);
    assert_eq!(code(&bin().args(&args).args(["--jobs", "4"]).arg("--out").arg(&b).output().unwrap()), 0);
    assert_eq!(checksums(&a), checksums(&b));
    assert_eq!(manifest(&a)["run_id"], manifest(&b)["run_id"]);

    // Replaying the persisted config reproduces everything.
    let c = t.path().join("c");
    let cfg = a.join("config.json");
    let o = bin().args(["std", "--config", cfg.to_str().unwrap()]).arg("--out").arg(&c).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(checksums(&a), checksums(&c));

    let e = t.path().join("e");
    let o = bin().args(base).args(["--seed", "8"]).arg("--out").arg(&e).output().unwrap();
    assert_eq!(code(&o), 0);
    assert_ne!(checksums(&a), checksums(&e));
}

#[test]
fn config_for_other_subcommand_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    let d = rule("doubling.json");
    let a = t.path().join("a");
    assert_eq!(code(&run(&["std", "--rule", d.to_str().unwrap(), "--kmax", "4"], &a)), 0);
    let o = run(&["weyl", "--config", a.join("config.json").to_str().unwrap()], &t.path().join("b"));
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_inputs_exit_2() {
    let t = tempfile::tempdir().unwrap();
    let bad = t.path().join("bad.json");
    std::fs::write(&bad, r#"{"kind": "constant_matrix", "dim": 2, "matrices": [[[1]]]}"#).unwrap();
    assert_eq!(code(&run(&["std", "--rule", bad.to_str().unwrap()], &t.path().join("o"))), 2);
    assert_eq!(code(&run(&["std", "--rule", "/nonexistent/rule.json"], &t.path().join("o"))), 2);
    let d = rule("doubling.json");
    assert_eq!(code(&run(&["std", "--rule", d.to_str().unwrap(), "--f", "wave:3"], &t.path().join("o"))), 2);
    assert_eq!(code(&run(&["std"], &t.path().join("o"))), 2);
    assert_eq!(code(&run(&["no-such-command"], &t.path().join("o"))), 2);
}

#[test]
fn precision_cap_exits_3_and_names_b() {
    let t = tempfile::tempdir().unwrap();
    let d = rule("doubling.json");
    let o = bin()
        .env("STDIFF_PRECISION_CAP", "128")
        .args(["weyl", "--rule", d.to_str().unwrap(), "--kmax", "1024", "--points", "2"])
        .arg("--out")
        .arg(t.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("B = 1088"), "{err}");
}

#[test]
fn explicit_bits_below_requirement_exit_3() {
    let t = tempfile::tempdir().unwrap();
    let d = rule("doubling.json");
    let o = run(&["weyl", "--rule", d.to_str().unwrap(), "--kmax", "1024", "--bits", "256"], &t.path().join("o"));
    assert_eq!(code(&o), 3);
}

#[test]
fn dry_run_reports_plan_without_artifacts() {
    let t = tempfile::tempdir().unwrap();
    let d = rule("doubling.json");
    let out = t.path().join("o");
    for args in [
        vec!["weyl", "--rule", d.to_str().unwrap(), "--kmax", "4096", "--points", "200", "--dry-run"],
        vec!["std", "--rule", d.to_str().unwrap(), "--kmax", "64", "--dry-run"],
        vec!["meager", "--rule", d.to_str().unwrap(), "--dry-run"],
        vec!["shift", "--rule", d.to_str().unwrap(), "--dry-run"],
        vec!["kernels", "--rule", d.to_str().unwrap(), "--dry-run"],
        vec!["dp-check", "--finite", "Z2", "--mode", "refute", "--dry-run"],
    ] {
        let o = run(&args, &out);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let v = stdout_json(&o);
        assert!(v["work"].as_u64().is_some());
    }
    let o = run(&["weyl", "--rule", d.to_str().unwrap(), "--kmax", "4096", "--dry-run"], &out);
    assert_eq!(stdout_json(&o)["precision_bits"], 4160);
    let o = run(&["weyl", "--rule", d.to_str().unwrap(), "--kmax", "4096", "--bits", "4224", "--dry-run"], &out);
    assert_eq!(stdout_json(&o)["precision_bits"], 4224);
    assert!(!out.exists());
}

#[test]
fn meager_witness_recertifies() {
    let t = tempfile::tempdir().unwrap();
    let d = rule("doubling.json");
    let out = t.path().join("m");
    let o = run(&["meager", "--rule", d.to_str().unwrap(), "--K", "8", "--verify"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["summary"]["all_verified"], true);

    let cert = out.join("witness_0.json");
    let o = bin().args(["verify-witness", cert.to_str().unwrap()]).output().unwrap();
    assert_eq!(code(&o), 0);

    // Moving the point far from the kernel point must fail the replay.
    let mut v: Value = serde_json::from_slice(&std::fs::read(&cert).unwrap()).unwrap();
    v["x"] = serde_json::json!(["1/3"]);
    let bad = t.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_vec(&v).unwrap()).unwrap();
    let o = bin().args(["verify-witness", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn kernels_and_shift_write_reports() {
    let t = tempfile::tempdir().unwrap();
    let k = t.path().join("k");
    let r = rule("expanding2d.json");
    let o = run(&["kernels", "--rule", r.to_str().unwrap(), "--horizon", "4", "--matrix", "2;"], &k);
    assert_eq!(code(&o), 2);
    let o = run(&["kernels", "--rule", r.to_str().unwrap(), "--horizon", "4", "--matrix", "2,1;1,2"], &k);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&std::fs::read(k.join("kernels.json")).unwrap()).unwrap();
    assert_eq!(v["density"]["rows"].as_array().unwrap().len(), 4);
    assert_eq!(v["toral"]["pass"], true);

    let s = t.path().join("s");
    let c = rule("cantor.json");
    let o = run(&["shift", "--rule", c.to_str().unwrap(), "--kmax", "2000"], &s);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(s.join("shift.json").exists());
}
