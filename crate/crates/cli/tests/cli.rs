use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wavepart"));
    cmd.env("SOURCE_DATE_EPOCH", "1700000000");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn std_normal_cdf(t: f64) -> f64 {
    // Simpson's rule on the density, independent of the library's erfc.
    let (a, n) = (-12.0, 20_000);
    let h = (t - a) / n as f64;
    let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    let mut sum = f(a) + f(t);
    for k in 1..n {
        sum += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

#[test]
fn mi_with_zero_overlap_is_zero() {
    let v = stdout_json(&run(&["mi", "--s", "0", "--P", "0.3"]));
    assert_eq!(v["I"].as_f64(), Some(0.0));
}

#[test]
fn count_count_mi_at_half_is_ln2() {
    let v = stdout_json(&run(&["mi", "--P", "0.5", "--P2", "0.5"]));
    assert!((v["I"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn params_of_sample_config_match_closed_forms() {
    let cfg = repo_file("configs/wave_count.json");
    let v = stdout_json(&run(&["params", "--config", cfg.to_str().unwrap()]));
    let wave = &v["detectors"][0];
    let count = &v["detectors"][1];

    // Gaussian smearing of width a centred a distance d from the beam axis.
    let (a, d) = (0.15f64, 0.8f64);
    let sigma = (1.0 / (4.0 * PI * a * a)).sqrt();
    let overlap = (2.0 / PI).sqrt() / (1.0 + a * a) * (-d * d / (1.0 + a * a)).exp();
    let s = overlap * (2.0 * PI).sqrt() * a;
    assert!((wave["sigma"].as_f64().unwrap() / sigma - 1.0).abs() < 1e-8);
    assert!((wave["s"][0].as_f64().unwrap() / s - 1.0).abs() < 1e-8);
    assert_eq!(wave["s"][1].as_f64(), Some(0.0));

    // |φ|² factorizes into normals of standard deviation 1/2 per axis.
    let p = (std_normal_cdf(3.8) - std_normal_cdf(0.2)) * (std_normal_cdf(5.0) - std_normal_cdf(-5.0));
    assert!((count["P"].as_f64().unwrap() - p).abs() < 1e-8);
    assert!(count["sigma"].is_null());
    assert_eq!(v["mode"], "wc");
    assert_eq!(v["feasible"], true);
}

#[test]
fn direct_config_echoes_inputs() {
    let cfg = repo_file("configs/direct.json");
    let v = stdout_json(&run(&["params", "--config", cfg.to_str().unwrap()]));
    assert_eq!(v["detectors"][0]["sigma"].as_f64(), Some(1.0));
    assert_eq!(v["detectors"][0]["s"][0].as_f64(), Some(0.5));
    assert_eq!(v["detectors"][1]["P"].as_f64(), Some(0.4));
}

#[test]
fn infeasible_wave_count_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"direct":[{"mode":"wave","sigma":1,"s":0.8,"P":0},{"mode":"count","sigma":1,"s":0,"P":0.6}]}"#,
    )
    .unwrap();
    let out = run(&["params", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 - P - |s|^2 >= 0"));
}

#[test]
fn schema_violations_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"direct":[{"mode":"wave","sigma":1,"s":0.5,"P":0,"colour":"red"}]}"#).unwrap();
    let out = run(&["params", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    assert_eq!(run(&["mi", "--s", "1.5", "--P", "0.1"]).status.code(), Some(2));
    assert_eq!(run(&["sample", "--mode", "wc"]).status.code(), Some(2));
}

fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn fig2_curves_cross_at_plus_minus_sigma() {
    let sigma = 1.3;
    let rows = csv_rows(&run(&["figure", "fig2", "--sigma", "1.3"]));
    assert_eq!(rows.len(), 5 * 401);
    for target in [sigma, -sigma] {
        let at: Vec<&Vec<String>> = rows
            .iter()
            .filter(|r| r[0].parse::<f64>().unwrap() == target)
            .collect();
        assert_eq!(at.len(), 5);
        let first = &at[0][2];
        assert!(at.iter().all(|r| &r[2] == first));
    }
    for r in rows.iter().filter(|r| r[1].parse::<f64>().unwrap() == 0.0) {
        let w: f64 = r[0].parse().unwrap();
        let gauss = (-0.5 * (w / sigma).powi(2)).exp() / ((2.0 * PI).sqrt() * sigma);
        assert!((r[2].parse::<f64>().unwrap() - gauss).abs() < 1e-15);
    }
}

#[test]
fn fig3_rejects_overlap_beyond_limit() {
    let out = run(&["figure", "fig3", "--s", "0.5,0.75"]);
    assert_eq!(out.status.code(), Some(2));
    let rows = csv_rows(&run(&["figure", "fig3", "--points", "5"]));
    assert_eq!(rows.len(), 4 * 25);
}

#[test]
fn fig4_peak_is_near_published_value() {
    let rows = csv_rows(&run(&["figure", "fig4"]));
    assert_eq!(rows.len(), 101 * 101);
    let peak = rows
        .iter()
        .filter(|r| r[3] == "true")
        .map(|r| r[2].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!((peak - 0.18).abs() < 0.005, "peak {peak}");
    assert!(rows.iter().filter(|r| r[3] == "false").all(|r| r[2] == "NaN"));
}

#[test]
fn oracle_reports_all_pass() {
    let v = stdout_json(&run(&["oracle", "--G", "4", "--nmax", "3"]));
    assert_eq!(v["dimension"].as_u64(), Some(969));
    assert_eq!(v["all_pass"], true);
}

#[test]
fn oracle_dimension_cap_is_invalid_input() {
    let out = run(&["oracle", "--G", "8", "--nmax", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds cap"));
}

#[test]
fn sample_is_byte_identical_across_runs() {
    let a = run(&["sample", "--mode", "wc", "--n", "1000", "--seed", "7"]);
    let b = run(&["sample", "--mode", "wc", "--n", "1000", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["sample", "--mode", "wc", "--n", "1000", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn output_directory_gets_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let status = run(&["sample", "--mode", "cc", "--n", "10", "--seed", "3", "--out", out]).status;
    assert!(status.success());
    let data = std::fs::read_to_string(dir.path().join("sample.csv")).unwrap();
    assert!(data.starts_with("c1,c2\n"));
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sample.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "sample");
    assert_eq!(manifest["seed"].as_u64(), Some(3));
    assert_eq!(manifest["timestamp"].as_u64(), Some(1_700_000_000));
    assert_eq!(manifest["outputs"][0], "sample.csv");
    assert_eq!(manifest["parameters"]["mode"], "cc");
}
