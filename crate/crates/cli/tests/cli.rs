use std::path::Path;
use std::process::{Command, Output};

fn leantopo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leantopo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sample_then_infer() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("helix.txt");
    let report = dir.path().join("report.json");
    let barcode = dir.path().join("barcode.txt");

    let out = leantopo(&["sample", "helix", "--n", "1000", "-o", path(&points)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let sidecar = std::fs::read_to_string(dir.path().join("helix.txt.sidecar")).unwrap();
    assert_eq!(sidecar.lines().count(), 1000);

    let out = leantopo(&[
        "infer",
        path(&points),
        "--intrinsic-dim",
        "1",
        "--mode",
        "practical",
        "--report",
        path(&report),
        "--export-barcode",
        path(&barcode),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["betti"], serde_json::json!([1, 1]));
    assert_eq!(json["config"]["mode"], "practical");
    assert_eq!(json["config"]["reduced_lean_set"], true);
    assert!(std::fs::read_to_string(&barcode).unwrap().lines().count() > 0);
}

#[test]
fn report_goes_to_stdout_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("circle.txt");
    assert!(
        leantopo(&["sample", "circle", "--n", "1200", "-o", path(&points)])
            .status
            .success()
    );
    let out = leantopo(&["infer", path(&points), "--intrinsic-dim", "1"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["betti"], serde_json::json!([1, 1]));
    assert_eq!(json["input_size"], 1200);
}

#[test]
fn sparsify_writes_retained_points() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("helix.txt");
    let sparse = dir.path().join("sparse.txt");
    assert!(
        leantopo(&["sample", "helix", "--n", "1000", "-o", path(&points)])
            .status
            .success()
    );
    let out = leantopo(&[
        "sparsify",
        path(&points),
        "--intrinsic-dim",
        "1",
        "--mode",
        "practical",
        "-o",
        path(&sparse),
    ]);
    assert!(out.status.success());
    let kept = std::fs::read_to_string(&sparse).unwrap().lines().count();
    assert!(kept > 100 && kept < 1000, "{kept}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("uniformity verified"));
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.txt");
    assert_eq!(
        leantopo(&["infer", path(&missing), "--intrinsic-dim", "1"])
            .status
            .code(),
        Some(3)
    );

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0 0\n1 oops\n").unwrap();
    let out = leantopo(&["infer", path(&bad), "--intrinsic-dim", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let flat = dir.path().join("flat.txt");
    let line: String = (0..40).map(|i| format!("{} 0\n", i as f64 * 0.1)).collect();
    std::fs::write(&flat, line).unwrap();
    let out = leantopo(&["infer", path(&flat), "--intrinsic-dim", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hint:"));

    let out = leantopo(&["infer", path(&flat), "--intrinsic-dim", "1", "--r", "0.5"]);
    assert_eq!(out.status.code(), Some(7));
}

#[test]
fn noisy_samples_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for p in [&a, &b] {
        let out = leantopo(&[
            "sample",
            "torus",
            "--n",
            "2000",
            "--noise-scale",
            "0.005",
            "--seed",
            "4",
            "-o",
            path(p),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn selftest_passes() {
    let out = leantopo(&["selftest"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAILED"));
}
