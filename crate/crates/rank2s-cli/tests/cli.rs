//! End-to-end tests of the rank2s binary: exit codes, JSON shape,
//! determinism, and cache behavior.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rank2s"))
}

fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn json_of(output: &Output) -> serde_json::Value {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn test_worked_example_t_exact() {
    let dir = tempfile::tempdir().unwrap();
    let x = write_file(dir.path(), "x.txt", "0\n2\n");
    let y = write_file(dir.path(), "y.txt", "1\n3\n");
    let out = bin()
        .args(["test", "--x"])
        .arg(&x)
        .arg("--y")
        .arg(&y)
        .args(["--statistic", "T", "--null", "exact", "--cache-dir"])
        .arg(dir.path().join("cache"))
        .output()
        .unwrap();
    let json = json_of(&out);
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["statistic_value"], 0.125);
    assert_eq!(json["method"], "T");
    assert_eq!(json["null_model"], "exact");
    assert_eq!(json["m"], 2);
    assert_eq!(json["n"], 2);
    // every relabeling of four points reaches T >= 1/8
    assert_eq!(json["p_value"], 1.0);
    assert_eq!(json["decision"], "fail_to_reject");
}

#[test]
fn test_worked_example_cvm() {
    let dir = tempfile::tempdir().unwrap();
    let x = write_file(dir.path(), "x.txt", "0\n2\n");
    let y = write_file(dir.path(), "y.txt", "1\n3\n");
    let out = bin()
        .args(["test", "--x"])
        .arg(&x)
        .arg("--y")
        .arg(&y)
        .args(["--statistic", "CvM", "--null", "exact", "--cache-dir"])
        .arg(dir.path().join("cache"))
        .output()
        .unwrap();
    let json = json_of(&out);
    assert_eq!(json["statistic_value"], 0.25);
}

#[test]
fn test_missing_file_is_input_error() {
    let out = bin()
        .args([
            "test",
            "--x",
            "/nonexistent/x.txt",
            "--y",
            "/nonexistent/y.txt",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn test_parse_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let x = write_file(dir.path(), "x.txt", "1.0\noops\n");
    let y = write_file(dir.path(), "y.txt", "2.0\n");
    let out = bin()
        .args(["test", "--x"])
        .arg(&x)
        .arg("--y")
        .arg(&y)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("x.txt:2"), "stderr: {stderr}");
}

#[test]
fn test_ties_rejected_with_hint_then_midrank_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let x = write_file(dir.path(), "x.txt", "1\n1\n");
    let y = write_file(dir.path(), "y.txt", "2\n3\n");
    let out = bin()
        .args(["test", "--x"])
        .arg(&x)
        .arg("--y")
        .arg(&y)
        .args(["--cache-dir"])
        .arg(dir.path().join("cache"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--midrank"));

    let out = bin()
        .args(["test", "--x"])
        .arg(&x)
        .arg("--y")
        .arg(&y)
        .args(["--midrank", "--cache-dir"])
        .arg(dir.path().join("cache"))
        .output()
        .unwrap();
    let json = json_of(&out);
    assert_eq!(json["tie_policy"], "midrank");
    assert_eq!(json["ties_present"], true);
}

#[test]
fn test_mc_null_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let x = write_file(dir.path(), "x.txt", "0.1\n0.9\n2.3\n3.1\n4.7\n");
    let y = write_file(dir.path(), "y.txt", "1.2\n2.8\n3.9\n5.5\n6.1\n");
    let run = || {
        bin()
            .args(["test", "--x"])
            .arg(&x)
            .arg("--y")
            .arg(&y)
            .args([
                "--null",
                "mc",
                "--reps",
                "20000",
                "--seed",
                "11",
                "--cache-dir",
            ])
            .arg(dir.path().join("cache"))
            .output()
            .unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(json_of(&a), json_of(&b));
    assert_eq!(json_of(&a)["null_model"], "mc:reps=20000:seed=11");
}

#[test]
fn mtest_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let rows = "0.0,0.0\n1.0,0.5\n2.0,1.0\n0.5,2.0\n1.5,1.5\n2.5,0.5\n3.0,2.0\n0.2,1.2\n";
    let x = write_file(dir.path(), "pts.csv", rows);
    let out = bin()
        .args(["mtest", "--x"])
        .arg(&x)
        .arg("--y")
        .arg(&x)
        .args(["--b", "199", "--seed", "5"])
        .output()
        .unwrap();
    let json = json_of(&out);
    assert_eq!(json["method"], "TM");
    assert!(json["p_value"].as_f64().unwrap() >= 1.0 / 200.0);
}

#[test]
fn mtest_bundled_fixture_rejects() {
    let out = bin()
        .args(["mtest", "--x"])
        .arg(fixture("mv_x.csv"))
        .arg("--y")
        .arg(fixture("mv_y.csv"))
        .args(["--b", "499", "--seed", "1"])
        .output()
        .unwrap();
    let json = json_of(&out);
    assert_eq!(json["decision"], "reject");
    assert_eq!(json["m"], 50);
    assert_eq!(json["n"], 50);
    assert_eq!(json["p_value"], 1.0 / 500.0);
}

#[test]
fn mtest_single_column_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let x = write_file(dir.path(), "x.csv", "0.4\n1.1\n2.2\n3.0\n0.9\n");
    let y = write_file(dir.path(), "y.csv", "1.5\n2.1\n3.3\n4.0\n2.9\n");
    let out = bin()
        .args(["mtest", "--x"])
        .arg(&x)
        .arg("--y")
        .arg(&y)
        .args(["--b", "99", "--seed", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn mtest_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let x = write_file(dir.path(), "x.csv", "0.0,1.0\n2.0,3.0\n");
    let y = write_file(dir.path(), "y.csv", "1.0\n2.0\n");
    let out = bin()
        .args(["mtest", "--x"])
        .arg(&x)
        .arg("--y")
        .arg(&y)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn critval_exact_matches_reference_and_hits_cache() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        bin()
            .args([
                "critval",
                "--alpha",
                "0.05",
                "--m",
                "7",
                "--n",
                "7",
                "--cache-dir",
            ])
            .arg(dir.path().join("cache"))
            .output()
            .unwrap()
    };
    let first = run();
    assert!(first.status.success());
    let value: f64 = String::from_utf8_lossy(&first.stdout)
        .trim()
        .parse()
        .unwrap();
    assert!((value - 0.4643).abs() < 5e-5, "critical value {value}");
    assert!(String::from_utf8_lossy(&first.stderr).contains("cache miss"));

    let second = run();
    assert!(String::from_utf8_lossy(&second.stderr).contains("cache hit"));
    let again: f64 = String::from_utf8_lossy(&second.stdout)
        .trim()
        .parse()
        .unwrap();
    assert_eq!(value, again);
}

#[test]
fn critval_asymptotic_with_quantile_cache() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        bin()
            .args([
                "critval",
                "--alpha",
                "0.05",
                "--m",
                "50",
                "--n",
                "50",
                "--method",
                "asymptotic",
                "--d",
                "4",
                "--zd-samples",
                "1000000",
                "--seed",
                "12",
                "--cache-dir",
            ])
            .arg(dir.path().join("cache"))
            .output()
            .unwrap()
    };
    let first = run();
    assert!(first.status.success());
    let value: f64 = String::from_utf8_lossy(&first.stdout)
        .trim()
        .parse()
        .unwrap();
    assert!((value - 0.4617).abs() < 2e-3, "critical value {value}");
    assert!(String::from_utf8_lossy(&first.stderr).contains("cache miss"));
    assert!(dir.path().join("cache/zd_quantiles.csv").is_file());

    let second = run();
    assert!(String::from_utf8_lossy(&second.stderr).contains("cache hit"));
    let again: f64 = String::from_utf8_lossy(&second.stdout)
        .trim()
        .parse()
        .unwrap();
    assert_eq!(value, again);
}

#[test]
fn critval_too_large_enumeration_suggests_fallback() {
    let out = bin()
        .args(["critval", "--alpha", "0.05", "--m", "20", "--n", "20"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("asymptotic"), "stderr: {stderr}");
}

#[test]
fn null_subcommand_builds_and_caches() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        bin()
            .args([
                "null",
                "--m",
                "5",
                "--n",
                "5",
                "--statistic",
                "T",
                "--cache-dir",
            ])
            .arg(dir.path().join("cache"))
            .output()
            .unwrap()
    };
    let json = json_of(&run());
    assert_eq!(json["outcomes"], 252);
    assert_eq!(json["cache"], "miss");
    let json = json_of(&run());
    assert_eq!(json["cache"], "hit");
}

#[test]
fn cache_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["null", "--m", "3", "--n", "3"])
        .env("RANK2S_CACHE", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("null_T_m3_n3_exact.csv").is_file());
}

#[test]
fn power_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_file(
        dir.path(),
        "study.cfg",
        r#"
alpha = 0.05
iterations = 150
seed = 9

[[tests]]
statistic = "T"
null = { kind = "mc", reps = 5000 }

[[scenarios]]
label = "shift"
delta = 1.5
m = 12
n = 12
x = { family = "normal", mean = 0.0, sd = 1.0 }
y = { family = "normal", mean = 1.5, sd = 1.0 }
"#,
    );
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let res = bin()
            .args(["power", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert!(
            res.status.success(),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("scenario,test,delta,power,se\n"));
    assert!(text.contains("shift,T,1.5,"));
}

#[test]
fn power_rejects_low_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_file(
        dir.path(),
        "bad.cfg",
        r#"
alpha = 0.05
iterations = 50
seed = 1

[[tests]]
statistic = "T"
null = { kind = "exact" }

[[scenarios]]
label = "x"
m = 5
n = 5
x = { family = "normal", mean = 0.0, sd = 1.0 }
y = { family = "normal", mean = 0.0, sd = 1.0 }
"#,
    );
    let out = bin()
        .args(["power", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bundled_config_parses() {
    // smoke-parse every bundled desk config without running it
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(configs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) == Some("cfg") {
            let text = std::fs::read_to_string(&path).unwrap();
            rank2s::PowerStudyConfig::from_toml_str(&text)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 5, "expected bundled configs, found {seen}");
}
