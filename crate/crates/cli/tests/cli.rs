use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hodge-dn"));
    c.env_remove("HODGE_DN_THREADS");
    c
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().arg("run").args(args).output().expect("spawn hodge-dn")
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn annulus_recovery_zero_field() {
    let o = run(&["--shape", "annulus", "--res", "8", "--field", "zero", "--checks", "recovery"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert_eq!(r["rank_R"]["0"], 1);
    assert_eq!(r["config"]["seed"], 0);
    assert_eq!(r["config"]["checks"], serde_json::json!(["recovery"]));
}

#[test]
fn annulus_recovery_rotation_kills_all_ranks() {
    let o = run(&["--shape", "annulus", "--res", "8", "--field", "rotation(s=1)", "--checks", "recovery"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    let ranks = r["rank_R"].as_object().unwrap();
    assert!(!ranks.is_empty());
    assert!(ranks.values().all(|v| v == 0), "{ranks:?}");
}

#[test]
fn non_orientable_mesh_is_a_config_error() {
    let o = run(&["--mesh", data("mobius.off").to_str().unwrap(), "--checks", "recovery"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("orientable"));
}

#[test]
fn backend_mismatches_exit_2() {
    // rotation on a shape that is not B × S¹, and on an arbitrary mesh
    assert_eq!(run(&["--shape", "disk", "--res", "3", "--field", "rotation(s=1)"]).status.code(), Some(2));
    let m = data("mobius.off");
    assert_eq!(run(&["--mesh", m.to_str().unwrap(), "--field", "rotation"]).status.code(), Some(2));
    assert_eq!(run(&["--shape", "disk", "--res", "3", "--checks", "equivariant"]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    for args in [
        &["--shape", "torus"][..],
        &["--shape", "annulus", "--res", "1"],
        &["--shape", "disk", "--field", "spin"],
        &["--shape", "disk", "--checks", "dn,magic"],
        &["--shape", "disk", "--tol.nonsense", "1"],
        &["--shape", "disk", "--tol.dn", "-1"],
    ] {
        assert_eq!(run(args).status.code(), Some(2), "{args:?}");
    }
    let o = bin().env("HODGE_DN_THREADS", "zero").args(["run", "--shape", "disk", "--res", "2"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn closed_mesh_runs_interior_checks_only() {
    let s = data("sphere.off");
    let o = run(&["--mesh", s.to_str().unwrap(), "--checks", "identities,harmonic"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&o)["harmonic"]["dims"]["neumann"], serde_json::json!([1, 0, 1]));
    assert_eq!(run(&["--mesh", s.to_str().unwrap(), "--checks", "dn"]).status.code(), Some(2));
}

#[test]
fn failing_check_exits_1_and_names_it() {
    // no separation angle can exceed π/2
    let o = run(&["--shape", "annulus", "--res", "4", "--checks", "harmonic,recovery", "--tol.theta_min", "2"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("failed checks: harmonic"), "{err}");
    assert!(!err.contains("recovery"), "{err}");
    let r = report(&o);
    assert_eq!(r["config"]["tolerances"]["theta_min"], 2.0);
    assert_eq!(r["checks"]["harmonic"]["passed"], false);
}

#[test]
fn reports_are_deterministic_and_parallelism_independent() {
    let args = ["--shape", "square", "--res", "3", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let mut seq = args.to_vec();
    seq.push("--sequential");
    assert_eq!(run(&seq).stdout, a.stdout);
    let capped = bin().env("HODGE_DN_THREADS", "1").arg("run").args(args).output().unwrap();
    assert_eq!(capped.stdout, a.stdout);
}

#[test]
fn full_report_has_every_section() {
    let o = run(&["--shape", "annulus", "--res", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    for key in ["config", "node_dims", "exactness_angles", "commutativity_residuals", "cup_residuals", "oracle_betti", "refined_decomposition", "rank_R"] {
        assert!(!r[key].is_null(), "{key}");
    }
    assert_eq!(r["node_dims"], serde_json::json!([0, 1, 2, 1, 1, 2, 1, 0]));
    assert!(r["exactness_angles"].as_array().unwrap().iter().all(|a| a.as_f64().unwrap() <= 1e-6));
}

#[test]
fn export_round_trips_through_off() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let exp = dir.path().join("export");
    let o = run(&[
        "--shape", "annulus", "--res", "6", "--checks", "harmonic,dn",
        "--out", out.to_str().unwrap(), "--export", exp.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let first: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for f in ["mesh.off", "d_grade0.mtx", "mass_grade2.mtx", "operators.json", "dn_grade0.mtx", "dn_grade1.mtx", "dn.json"] {
        assert!(exp.join(f).exists(), "{f}");
    }
    let mtx = std::fs::read_to_string(exp.join("dn_grade1.mtx")).unwrap();
    assert!(mtx.to_lowercase().starts_with("%%matrixmarket matrix coordinate real general"));
    let again = run(&["--mesh", exp.join("mesh.off").to_str().unwrap(), "--checks", "harmonic,dn"]);
    assert_eq!(again.status.code(), Some(0));
    let second = report(&again);
    assert_eq!(first["harmonic"], second["harmonic"]);
    assert_eq!(first["dn"]["blocks"], second["dn"]["blocks"]);
}
