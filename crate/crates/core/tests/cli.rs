use std::path::Path;
use std::process::{Command, Output};

use chdroplet::field::read_snapshot;
use chdroplet::report::RunManifest;

fn chdroplet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chdroplet")).args(args).env_remove("CHDROPLET_OUT").output().expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Every artifact in the manifest exists and parses as its extension says.
fn check_manifest(dir: &Path, command: &str) -> RunManifest {
    let m = RunManifest::read(dir).expect("manifest");
    assert_eq!(m.command, command);
    assert_eq!(m.format_version, chdroplet::report::FORMAT_VERSION);
    for name in &m.artifacts {
        let path = dir.join(name);
        assert!(path.exists(), "{name} listed but missing");
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                serde_json::from_str::<serde_json::Value>(&std::fs::read_to_string(&path).unwrap()).expect(name);
            }
            Some("csv") => {
                let text = std::fs::read_to_string(&path).unwrap();
                let mut lines = text.lines();
                let width = lines.next().expect("header").split(',').count();
                assert!(width > 1);
                for line in lines {
                    if !line.contains('"') {
                        assert_eq!(line.split(',').count(), width, "{name}: {line}");
                    }
                }
            }
            Some("svg") => assert!(std::fs::read_to_string(&path).unwrap().starts_with("<svg")),
            Some("snap") => {
                read_snapshot(&path).expect(name);
            }
            other => panic!("unexpected artifact type {other:?}"),
        }
    }
    m
}

#[test]
fn constants_report() {
    let dir = tempfile::tempdir().unwrap();
    for d in ["2", "3"] {
        let target = dir.path().join(d);
        let o = chdroplet(&["constants", "--d", d, "--out", &out_arg(&target)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        for name in ["S ", "chi", "C_star", "eta_star", "K_star", "M ", "B "] {
            assert!(text.contains(name), "{name} missing");
        }
        check_manifest(&target, "constants");
    }
    let o = chdroplet(&["constants", "--d", "5", "--out", &out_arg(&dir.path().join("5"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn phi_scan_regimes_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run = |rel: &str, name: &str| {
        let target = dir.path().join(name);
        let o = chdroplet(&["phi-scan", "--K-rel", rel, "--points", "501", "--out", &out_arg(&target)]);
        assert!(o.status.success());
        check_manifest(&target, "phi-scan");
        (stdout(&o), std::fs::read(target.join("phi_scan.csv")).unwrap())
    };
    let (sub, _) = run("0.7", "sub");
    assert!(sub.contains("Uniform"));
    let (sup, first) = run("1.5", "sup");
    assert!(sup.contains("Droplet"));
    let (crit, _) = run("1", "crit");
    assert!(crit.contains("Critical") && crit.contains("minima at eta = 0 and"));
    let (_, second) = run("1.5", "sup-again");
    assert_eq!(first, second);
}

#[test]
fn unresolved_grid_fails_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("run");
    let o = chdroplet(&["minimize", "--K-rel", "2", "--L", "200", "--N", "256", "--out", &out_arg(&target)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not resolved"));
    assert!(!target.exists());
}

#[test]
fn missing_density_is_a_precondition_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = chdroplet(&["minimize", "--L", "40", "--N", "128", "--out", &out_arg(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = chdroplet(&["minimize", "--K", "3", "--n", "-0.9"]);
    assert_eq!(o.status.code(), Some(2), "conflicting flags are rejected");
}

#[test]
fn minimize_small_supercritical_and_subcritical() {
    let dir = tempfile::tempdir().unwrap();
    let sup = dir.path().join("sup");
    let o = chdroplet(&["minimize", "--K-rel", "2", "--L", "40", "--N", "128", "--out", &out_arg(&sup)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("classification droplet"));
    let m = check_manifest(&sup, "minimize");
    for name in ["field.snap", "trace.csv", "diagnostics.json", "seeds.csv"] {
        assert!(m.artifacts.iter().any(|a| a == name), "{name}");
    }
    let first = std::fs::read(sup.join("trace.csv")).unwrap();

    let again = dir.path().join("again");
    let o = chdroplet(&["minimize", "--K-rel", "2", "--L", "40", "--N", "128", "--out", &out_arg(&again)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(again.join("trace.csv")).unwrap(), first);
    assert_eq!(std::fs::read(again.join("seeds.csv")).unwrap(), std::fs::read(sup.join("seeds.csv")).unwrap());

    let sub = dir.path().join("sub");
    let o = chdroplet(&["minimize", "--K-rel", "0.5", "--L", "40", "--N", "128", "--out", &out_arg(&sub)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("classification uniform"));
}

#[test]
fn non_convergence_exits_3_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("partial");
    let o = chdroplet(&[
        "minimize",
        "--K-rel",
        "2",
        "--L",
        "40",
        "--N",
        "128",
        "--seeds",
        "eta-c,equimolar",
        "--max-iters",
        "3",
        "--out",
        &out_arg(&target),
    ]);
    assert_eq!(o.status.code(), Some(3));
    check_manifest(&target, "minimize");
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_chdroplet"))
        .args(["constants"])
        .env("CHDROPLET_OUT", &target)
        .output()
        .unwrap();
    assert!(o.status.success());
    check_manifest(&target, "constants");
}

#[test]
fn expand_reports_and_rejects_subcritical() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("expand");
    let o = chdroplet(&["expand", "--K-rel", "2", "--L", "60", "--N", "256", "--out", &out_arg(&target)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    check_manifest(&target, "expand");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(target.join("expansion.json")).unwrap()).unwrap();
    assert!(summary["r1_minus_sqrt_eta_c"].as_f64().unwrap().abs() < 1e-6);
    assert!(summary["energy_gap"].as_f64().unwrap() >= 0.0);

    let o =
        chdroplet(&["expand", "--K-rel", "0.5", "--L", "60", "--N", "256", "--out", &out_arg(&dir.path().join("no"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no droplet"));
}

#[test]
fn small_sweep_writes_plot_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("sweep");
    let o = chdroplet(&["sweep", "--L", "40", "--N", "128", "--count", "4", "--out", &out_arg(&target)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = check_manifest(&target, "sweep");
    assert!(m.artifacts.iter().any(|a| a == "sweep.svg"));
    let rows = std::fs::read_to_string(target.join("sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
}
