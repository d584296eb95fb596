use std::path::Path;
use std::process::{Command, Output};

fn chiamp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chiamp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn weil_with_zero_range_is_a_config_error() {
    assert_eq!(code(&chiamp(&["audit", "weil", "--c-max", "0"])), 2);
}

#[test]
fn weil_audit_passes() {
    let o = chiamp(&["audit", "weil", "--c-max", "200"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["violation_count"], 0);
    assert_eq!(v["suite"], "weil");
}

#[test]
fn chi_formula_passes() {
    let o = chiamp(&["verify", "chi-formula", "--q", "13", "--R", "4"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["max_ratio"].as_f64().unwrap() < 1e-8);
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = ["verify", "pi0", "--q", "5,7", "--max", "3"];
    let run = |out: &Path, threads: &str| {
        let mut v = args.to_vec();
        v.extend(["--threads", threads, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&chiamp(&v)), 0);
        std::fs::read(out).unwrap()
    };
    assert_eq!(run(&a, "1"), run(&b, "4"));
}

#[test]
fn scan_single_tuple() {
    let o = chiamp(&["scan", "--q", "29", "--N", "100", "--R", "4", "--S", "2", "--T", "2"]);
    assert_eq!(code(&o), 0);
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "q", "N", "R", "S", "T", "sigma_abs", "f_abs", "o_abs", "residual",
            "predicted_F_envelope", "predicted_O_envelope"
        ]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let residual: f64 = rows[0][8].parse().unwrap();
    assert!(residual < 1e-6);
}

#[test]
fn scan_csv_is_deterministic() {
    let args = ["scan", "--q", "29", "--N", "60,100", "--R", "4", "--S", "2", "--T", "2,3"];
    let a = chiamp(&args);
    let b = chiamp(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout.iter().filter(|&&c| c == b'\n').count(), 5);
}

#[test]
fn empty_scan_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[scan]\nq = []\n").unwrap();
    assert_eq!(code(&chiamp(&["--config", cfg.to_str().unwrap(), "scan"])), 2);
}

#[test]
fn config_file_sets_params_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[audit.weil]\nc-max = 30\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = chiamp(&["--config", cfg, "audit", "weil"]);
    let from_flag = chiamp(&["audit", "weil", "--c-max", "30"]);
    let overridden = chiamp(&["--config", cfg, "audit", "weil", "--c-max", "40"]);
    assert_eq!(from_file.stdout, from_flag.stdout);
    assert_ne!(from_file.stdout, overridden.stdout);
}

#[test]
fn malformed_registry_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("r.toml");
    std::fs::write(&reg, "version = 1\n[lemma1]\nodd = \"x\"\n").unwrap();
    assert_eq!(code(&chiamp(&["--registry", reg.to_str().unwrap(), "audit", "gauss", "--q-max", "11"])), 2);
}

#[test]
fn tight_registry_produces_violations() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("r.toml");
    let text = include_str!("../../core/registry.toml").replace("odd = 2.1", "odd = 1.0");
    std::fs::write(&reg, text).unwrap();
    let o = chiamp(&["--registry", reg.to_str().unwrap(), "audit", "lemma1", "--s-max", "27"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn exports_have_headers() {
    let o = chiamp(&["export", "coefficients", "--range", "4"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "n,re,im\n1,1.0,0.0\n2,3.0,0.0\n3,3.0,0.0\n4,6.0,0.0\n");
    let o = chiamp(&["export", "fourier", "--xi-max", "1", "--step", "0.5"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 4);
}
