use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn slipt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slipt"))
        .args(args)
        .output()
        .expect("run slipt")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Reference channel with the receiver noise raised to `sigma2_g`.
fn noisy_config(dir: &Path, sigma2_g: f64) -> String {
    let mut doc: Value = serde_json::from_str(&stdout(&slipt(&["preset"]))).unwrap();
    doc["devices"]["sigma2_g"] = sigma2_g.into();
    let path = dir.join("channel.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn pdf_csv_has_header_and_noise_column_at_zero() {
    let out = stdout(&slipt(&[
        "--format", "csv", "pdf", "--x", "0,1", "--y-min", "-3e-6", "--y-max", "3e-6", "--y-points", "7",
    ]));
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "y,x,pdf_quad,pdf_hermite,last_term");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 14);
    let sigma = 1e-6f64;
    for r in rows.iter().filter(|r| r[1] == 0.0) {
        let want = (-r[0] * r[0] / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        assert!((r[2] - want).abs() <= 1e-9 * want, "{r:?}");
    }
}

#[test]
fn output_is_deterministic() {
    let args = ["--format", "csv", "--seed", "3", "solve", "--A", "1", "--epsilon", "0.5", "--N", "11", "--allow-kkt-violation"];
    let a = slipt(&args);
    let b = slipt(&args);
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).starts_with("location,mass\n"));
}

#[test]
fn exit_codes_distinguish_failures() {
    assert_eq!(slipt(&["solve", "--A", "1"]).status.code(), Some(2));
    assert_eq!(slipt(&["solve", "--A", "-1", "--epsilon", "0.5"]).status.code(), Some(2));
    let infeasible = slipt(&["solve", "--A", "1", "--epsilon", "0.1", "--E-th", "1e-3", "--N", "11"]);
    assert_eq!(infeasible.status.code(), Some(3));
    assert!(!infeasible.stderr.is_empty());
    // At the reference noise an 11-point grid cannot satisfy the refined check.
    let coarse = slipt(&["solve", "--A", "1", "--epsilon", "1", "--N", "11"]);
    assert_eq!(coarse.status.code(), Some(1));
}

#[test]
fn region_csv_lists_one_row_per_requirement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = noisy_config(dir.path(), 1e-7);
    let out = stdout(&slipt(&[
        "--config", &cfg, "--format", "csv", "region", "--A", "1", "--epsilon", "0.5", "--E-th-list", "0,5e-4,2e-3",
        "--N", "11",
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "E_th_J,capacity_bits,feasible");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].ends_with(",false"), "{out}");
}

#[test]
fn learner_bundle_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = noisy_config(dir.path(), 1e-7);
    let bundle = dir.path().join("bundle");
    let report = dir.path().join("report.json");
    let common = ["--config", cfg.as_str()];

    let mut args = common.to_vec();
    args.extend(["--seed", "11", "export-learner", "--A", "1", "--epsilon", "0.5", "--samples", "500"]);
    args.extend(["--dir", bundle.to_str().unwrap()]);
    stdout(&slipt(&args));
    for f in ["channel.json", "constraints.json", "fading_samples.csv", "manifest.json"] {
        assert!(bundle.join(f).exists(), "{f}");
    }
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(bundle.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["sample_count"], 500);

    let mut args = common.to_vec();
    args.extend(["--out", report.to_str().unwrap(), "solve", "--A", "1", "--epsilon", "0.5", "--N", "21"]);
    stdout(&slipt(&args));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();

    // A learner that reproduces the solver's law exactly.
    let pmf = r["dist"]["pmf"].as_array().unwrap();
    let step = 1.0 / (pmf.len() - 1) as f64;
    let mut samples = Vec::new();
    for (k, p) in pmf.iter().enumerate() {
        let n = (p.as_f64().unwrap() * 100_000.0).round() as usize;
        samples.extend(std::iter::repeat_n(k as f64 * step, n));
    }
    let capacity = r["capacity_bits"].as_f64().unwrap();
    let learner = dir.path().join("learner.json");
    let doc = serde_json::json!({ "samples": samples, "mi_estimate_bits": capacity });
    std::fs::write(&learner, doc.to_string()).unwrap();

    let mut args = common.to_vec();
    args.extend(["validate-learner", "--learner-output", learner.to_str().unwrap()]);
    args.extend(["--report", report.to_str().unwrap()]);
    let v: Value = serde_json::from_str(&stdout(&slipt(&args))).unwrap();
    assert!(v["total_variation"].as_f64().unwrap() < 1e-3, "{v}");
    assert_eq!(v["mi_gap_bits"].as_f64().unwrap(), 0.0, "{v}");
    assert_eq!(v["peak_violations"], 0);
}
