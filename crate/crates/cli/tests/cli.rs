//! End-to-end tests of the command-line interface: file formats, flag
//! override behavior, determinism and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hankel-pencil"))
}

fn benchmark_model_json(n: usize, sigma: f64, seed: u64) -> String {
    let model = hankel_pencil::model::ExponentialModel::benchmark_five();
    let mut value = serde_json::to_value(&model).unwrap();
    let obj = value.as_object_mut().unwrap();
    obj.insert("n".into(), n.into());
    obj.insert("sigma".into(), serde_json::json!(sigma));
    obj.insert("seed".into(), seed.into());
    serde_json::to_string_pretty(&value).unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn run_ok(output: Output) -> String {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn synth_writes_series_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.json");
    write(&cfg, &benchmark_model_json(74, 0.5, 12345));

    let out_a = dir.path().join("a");
    run_ok(bin().args(["synth", "--config"]).arg(&cfg).arg("--out-dir").arg(&out_a).output().unwrap());
    let signal = std::fs::read_to_string(out_a.join("signal.csv")).unwrap();
    let data = std::fs::read_to_string(out_a.join("data.csv")).unwrap();
    assert_eq!(signal.lines().count(), 75, "header plus 74 rows");
    assert_eq!(data.lines().count(), 75);
    let first = signal.lines().nth(1).unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields[0], "0");
    let s0: f64 = fields[1].parse().unwrap();
    assert!((s0 - 31.0).abs() < 1e-9, "s_0 should equal the amplitude sum, got {s0}");

    // byte-identical on re-run with the same seed
    let out_b = dir.path().join("b");
    run_ok(bin().args(["synth", "--config"]).arg(&cfg).arg("--out-dir").arg(&out_b).output().unwrap());
    assert_eq!(data, std::fs::read_to_string(out_b.join("data.csv")).unwrap());

    // sigma = 0 makes data identical to the clean signal
    let out_c = dir.path().join("c");
    run_ok(
        bin()
            .args(["synth", "--sigma", "0", "--config"])
            .arg(&cfg)
            .arg("--out-dir")
            .arg(&out_c)
            .output()
            .unwrap(),
    );
    assert_eq!(
        std::fs::read_to_string(out_c.join("signal.csv")).unwrap(),
        std::fs::read_to_string(out_c.join("data.csv")).unwrap()
    );
}

#[test]
fn unknown_config_key_exits_2_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.json");
    let mut json: serde_json::Value =
        serde_json::from_str(&benchmark_model_json(10, 0.1, 1)).unwrap();
    json.as_object_mut().unwrap().insert("unexpected".into(), 1.into());
    write(&cfg, &serde_json::to_string(&json).unwrap());
    let output = bin()
        .args(["synth", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err: serde_json::Value =
        serde_json::from_slice(&output.stderr).expect("stderr must be JSON");
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("unexpected"));
}

#[test]
fn density_writes_csv_and_rejects_odd_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.json");
    write(&cfg, &benchmark_model_json(16, 0.4, 7));
    run_ok(bin().args(["synth", "--config"]).arg(&cfg).arg("--out-dir").arg(dir.path()).output().unwrap());

    let data = dir.path().join("data.csv");
    let out = run_ok(
        bin()
            .args(["density", "--sigma", "0.4", "--beta", "80", "--grid", "-1.2,-1.2,0.1,25", "--pgm"])
            .arg("--data")
            .arg(&data)
            .arg("--out-dir")
            .arg(dir.path())
            .output()
            .unwrap(),
    );
    assert!(out.contains("total mass 1.000000000"), "stdout: {out}");
    let csv = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
    assert!(csv.starts_with("x,y,potential,density"));
    assert_eq!(csv.lines().count(), 1 + 25 * 25);
    let pgm = std::fs::read_to_string(dir.path().join("density.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n23 23\n255"));

    // smallest legal lattice: single interior node
    run_ok(
        bin()
            .args(["density", "--sigma", "0.4", "--beta", "80", "--grid", "-1.0,-1.0,1.0,3"])
            .arg("--data")
            .arg(&data)
            .arg("--out-dir")
            .arg(dir.path())
            .output()
            .unwrap(),
    );

    // odd-length record is a contract violation
    let odd = dir.path().join("odd.csv");
    write(&odd, "k,re,im\n0,1.0,0.0\n1,0.5,0.0\n2,0.25,0.0\n");
    let output = bin()
        .args(["density", "--sigma", "0.4", "--beta", "80"])
        .arg("--data")
        .arg(&odd)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn estimate_recovers_noiseless_on_grid_model() {
    let dir = tempfile::tempdir().unwrap();
    // nodes exactly on the default lattice
    let grid = hankel_pencil::density::Grid::default_square();
    let x1 = grid.node(69, 60);
    let x2 = grid.node(40, 30);
    let model_json = serde_json::json!({
        "components": [
            {"c": [2.0, 0.0], "xi": [x1.re, x1.im]},
            {"c": [1.0, -0.5], "xi": [x2.re, x2.im]},
        ],
        "n": 20,
        "sigma": 0.0,
        "seed": 5,
    });
    let cfg = dir.path().join("model.json");
    write(&cfg, &model_json.to_string());
    run_ok(bin().args(["synth", "--config"]).arg(&cfg).arg("--out-dir").arg(dir.path()).output().unwrap());

    run_ok(
        bin()
            .args(["estimate", "--sigma", "0", "--beta", "100"])
            .arg("--data")
            .arg(dir.path().join("data.csv"))
            .arg("--out-dir")
            .arg(dir.path())
            .output()
            .unwrap(),
    );
    let est: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("estimate.json")).unwrap())
            .unwrap();
    assert_eq!(est["p_hat"], 2);
    assert_eq!(est["identifiable"], true);
    let xi = est["xi"].as_array().unwrap();
    let found: Vec<(f64, f64)> = xi
        .iter()
        .map(|p| (p[0].as_f64().unwrap(), p[1].as_f64().unwrap()))
        .collect();
    for target in [x1, x2] {
        assert!(
            found
                .iter()
                .any(|(re, im)| ((re - target.re).powi(2) + (im - target.im).powi(2)).sqrt() < 1e-9),
            "node {target} not recovered in {found:?}"
        );
    }
}

#[test]
fn reconstruct_noiseless_two_piece_function() {
    let dir = tempfile::tempdir().unwrap();
    let f = hankel_pencil::fourier::PiecewiseConstant::new(vec![-1.5, 0.2, 2.0], vec![2.0, -1.0])
        .unwrap();
    let coeffs = hankel_pencil::fourier::fourier_coeffs(&f, 32);
    let data = dir.path().join("data.csv");
    let mut text = String::from("k,re,im\n");
    for (k, c) in coeffs.iter().enumerate() {
        text.push_str(&format!("{},{},{}\n", k, c.re, c.im));
    }
    write(&data, &text);
    run_ok(
        bin()
            .args(["reconstruct", "--sigma", "0", "--beta", "160", "--n-breaks", "3", "--grid", "-1.5,-1.5,0.05,61"])
            .arg("--data")
            .arg(&data)
            .arg("--out-dir")
            .arg(dir.path())
            .output()
            .unwrap(),
    );
    let rec: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("reconstruction.json")).unwrap(),
    )
    .unwrap();
    let breaks = rec["breakpoints"].as_array().unwrap();
    assert_eq!(breaks.len(), 3);
    for (got, want) in breaks.iter().zip(&f.breakpoints) {
        assert!((got.as_f64().unwrap() - want).abs() < 0.08);
    }
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.starts_with("t,F_rough,F_reconstructed"));
}

#[test]
fn validate_chi2_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        bin()
            .args(["validate", "--suite", "chi2", "--replicates", "20000", "--seed", "3"])
            .arg("--out-dir")
            .arg(dir.path())
            .output()
            .unwrap(),
    );
    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("chi2.json")).unwrap())
            .unwrap();
    for report in reports.as_array().unwrap() {
        assert_eq!(report["pass"], true, "{report}");
    }
}

#[test]
fn bench_writes_timing_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(
        bin()
            .args(["bench", "--p-list", "8,16", "--m", "8"])
            .arg("--out-dir")
            .arg(dir.path())
            .output()
            .unwrap(),
    );
    assert!(out.contains("fast exponent"));
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert!(csv.starts_with("p,fast_per_point_s,direct_per_point_s"));
    assert_eq!(csv.lines().count(), 3);
}
