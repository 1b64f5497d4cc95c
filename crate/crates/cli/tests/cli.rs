use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const MINIMAL_SEMINORM: &str = r#"
experiment = "seminorm"
level = 2
h = 64
n = 20000

[system]
kind = "rotation"
alpha = 0.41421356237309503

[observable]
kind = "cos"
freq = 1
"#;

fn run(sub: &str, config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_ergolab"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&read(dir, "manifest.json")).unwrap()
}

#[test]
fn minimal_seminorm_config_writes_an_estimate() {
    let dir = TempDir::new().unwrap();
    let out = run("seminorm", MINIMAL_SEMINORM, dir.path(), &["--seed", "5"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let est: serde_json::Value = serde_json::from_str(&read(dir.path(), "seminorm.json")).unwrap();
    let v = est["value"].as_f64().unwrap();
    // U² of cos(2πx) under an irrational rotation: (∫|ĝ|⁴)^{1/4} = (2·(1/2)⁴)^{1/4}.
    assert!((v - 0.125f64.powf(0.25)).abs() < 0.02, "{v}");
    assert!(read(dir.path(), "trace.csv").starts_with("experiment_id,H,value\n"));
    let m = manifest(dir.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["seed"], 5);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["outputs"], serde_json::json!(["seminorm.json", "trace.csv"]));
}

#[test]
fn misspelled_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let bad = MINIMAL_SEMINORM.replace("[system]", "[systme]");
    let out = run("seminorm", &bad, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("systme"), "{err}");
    assert_eq!(manifest(dir.path())["status"], "config_error");
    assert!(!dir.path().join("out/seminorm.json").exists());
}

#[test]
fn same_config_and_seed_give_identical_outputs() {
    let cfg = r#"
n = 3000
horizon = 300
schedule = [[100, 1000], [1000, 3000]]

[system]
kind = "bernoulli"
symbol_values = [-1.0, 1.0]
probs = [0.5, 0.5]

[f1]
kind = "coordinate"
index = 0

[[targets]]
system = { kind = "rotation", alpha = 0.41421356237309503 }
g = { kind = "cos", freq = 1 }
y_samples = 3

[[targets]]
system = { kind = "cyclic", q = 5 }
g = { kind = "cos", freq = 2 }
y_samples = 2
"#;
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let ra = run("rtt", cfg, a.path(), &["--seed", "11"]);
    let rb = Command::new(env!("CARGO_BIN_EXE_ergolab"))
        .env("ERGOLAB_THREADS", "1")
        .args(["rtt", "--seed", "11", "--config"])
        .arg(a.path().join("config.toml"))
        .arg("--out")
        .arg(b.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(
        ra.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ra.stderr)
    );
    assert_eq!(
        rb.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&rb.stderr)
    );
    for name in [
        "weight.csv",
        "criterion.json",
        "densities.csv",
        "rtt.json",
        "profiles.csv",
    ] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
    assert_eq!(
        manifest(a.path())["config_sha256"],
        manifest(b.path())["config_sha256"]
    );

    let c = TempDir::new().unwrap();
    run("rtt", cfg, c.path(), &["--seed", "12"]);
    assert_ne!(read(a.path(), "weight.csv"), read(c.path(), "weight.csv"));
}

#[test]
fn experiment_mismatch_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = run("criterion", MINIMAL_SEMINORM, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seminorm"));
}

#[test]
fn cost_caps_need_force() {
    let dir = TempDir::new().unwrap();
    let big = MINIMAL_SEMINORM
        .replace("level = 2", "level = 3")
        .replace("h = 64", "h = 300");
    let out = run("seminorm", &big, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));

    let small_n = big.replace("n = 20000", "n = 50");
    let out = run("seminorm", &small_n, dir.path(), &["--force"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.toml");
    std::fs::write(&cfg, MINIMAL_SEMINORM).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ergolab"))
        .env("ERGOLAB_THREADS", "zero")
        .arg("seminorm")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ERGOLAB_THREADS"));
}

#[test]
fn criterion_extension_vdc_and_generic_run() {
    let dir = TempDir::new().unwrap();
    let out = run(
        "criterion",
        "n = 2000\nhorizon = 200\nschedule = [[100, 2000]]\n[system]\nkind = \"cyclic\"\nq = 2\n[f1]\nkind = \"table\"\nvalues = [1.0, -1.0]\n",
        dir.path(),
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(read(dir.path(), "densities.csv").starts_with("delta,L,R,density\n"));

    let skew = "n = 4000\nsamples = 8\nmc = 2000\npoints = 2\n[system]\nkind = \"skew_product\"\nalpha = 0.41421356237309503\n[f1]\nkind = \"cos\"\nfreq = 1\ncoord = 1\n";
    let dir = TempDir::new().unwrap();
    let out = run("extension", skew, dir.path(), &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(read(dir.path(), "averages.csv").lines().count(), 9);

    let dir = TempDir::new().unwrap();
    let out = run("generic", skew, dir.path(), &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(read(dir.path(), "generic.csv").lines().count(), 3);

    let dir = TempDir::new().unwrap();
    let out = run("vdc", "sequences = 6\nn = 1000\nh = 30\n", dir.path(), &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_str(&read(dir.path(), "vdc.json")).unwrap();
    assert_eq!(summary["holds"], true);
}
