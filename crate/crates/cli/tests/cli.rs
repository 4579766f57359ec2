use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use isozaki_core::io::sidecar_path;

fn kit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isozaki-kit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_GRID: &str = "[grid]\ndim = 2\nside = 1.0\nn = 11\n";

const SWEEP: &str = r#"
amplitudes = [0.001, 0.01, 0.1]
seed = 3
[grid]
dim = 2
side = 1.0
n = 11
[base]
kind = "gaussian-bump"
amplitude = 1.0
center = [0.45, 0.55]
width = 0.15
[perturbation]
kind = "gaussian-bump"
amplitude = 1.0
center = [0.5, 0.5]
width = 0.2
"#;

#[test]
fn forward_writes_data_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fwd.toml",
        &format!("count = 20\n{SMALL_GRID}[potential]\nkind = \"constant\"\nvalue = 0.5\n"),
    );
    let out = dir.path().join("q.bsd");
    let o = kit(&["forward", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.exists());
    assert!(sidecar_path(&out).exists());
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["count"], 20.0);
    let first = summary["lambda_first"].as_f64().unwrap();
    let h = 1.0 / 12.0;
    let expected = 8.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2) + 0.5;
    assert!((first - expected).abs() < 1e-9 * expected);
}

#[test]
fn verify_exit_codes_follow_the_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.toml", &format!("taus = [8.0, 16.0]\n{SMALL_GRID}"));
    let ok = kit(&["verify", "--config", s(&cfg), "--suite", "probe"]);
    let text = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(ok.status.code(), Some(0), "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");

    let report = dir.path().join("report.json");
    let bad = kit(&[
        "verify",
        "--config",
        s(&cfg),
        "--suite",
        "series",
        "--inject-fault",
        "flip-trace-sign",
        "--report",
        s(&report),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    let text = String::from_utf8_lossy(&bad.stdout);
    assert!(text.contains("FAIL series.neumann-identity"), "{text}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["fault"], "flip-trace-sign");
}

#[test]
fn malformed_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "bogus = 1\n");
    let o = kit(&["verify", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let o = kit(&["fit", "--in", s(&dir.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_is_reproducible_across_worker_counts_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.toml", SWEEP);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        let o = kit(&["--threads", threads, "sweep", "--config", s(&cfg), "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(bytes).unwrap().lines().count(), 4);

    let o = kit(&["fit", "--in", s(&a)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(fit["c_fit"].as_f64().unwrap().is_finite());
    assert_eq!(fit["exponent"], 0.25);
}

#[test]
fn fourier_then_reconstruct_recovers_a_shift() {
    let dir = tempfile::tempdir().unwrap();
    let base = "[potential]\nkind = \"gaussian-bump\"\namplitude = 1.0\ncenter = [0.45, 0.55]\nwidth = 0.15\n";
    let shifted = "[potential]\nkind = \"sum\"\n[[potential.parts]]\nkind = \"gaussian-bump\"\namplitude = 1.0\ncenter = [0.45, 0.55]\nwidth = 0.15\n[[potential.parts]]\nkind = \"constant\"\nvalue = 0.01\n";
    let mut paths = Vec::new();
    for (name, pot) in [("one", base), ("two", shifted)] {
        let cfg = write(dir.path(), &format!("{name}.toml"), &format!("[grid]\ndim = 2\nside = 1.0\nn = 31\n{pot}"));
        let out = dir.path().join(format!("{name}.bsd"));
        let o = kit(&["forward", "--config", s(&cfg), "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        paths.push(out);
    }
    let csv = dir.path().join("samples.csv");
    let o = kit(&[
        "fourier", "--bsd1", s(&paths[0]), "--bsd2", s(&paths[1]), "--tau", "10", "--rmax", "10",
        "--extrapolate", "1", "--out", s(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json = dir.path().join("rec.json");
    let o = kit(&[
        "reconstruct", "--samples", s(&csv), "--lambda", "auto", "--bsd1", s(&paths[0]), "--bsd2",
        s(&paths[1]), "--out", s(&json),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!((rec["lambda"].as_f64().unwrap() - 0.01).abs() < 1e-10);
    let field: Vec<f64> = rec["field"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let mean = field.iter().sum::<f64>() / field.len() as f64;
    assert!((mean + 0.01).abs() < 0.0025, "mean {mean}");
    assert!(rec["h_minus1_error"].as_f64().unwrap().is_finite());
}
