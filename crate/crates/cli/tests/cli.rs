use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const NICOLAI: &str = r#"name = "nicolai"
dim = 1
period = [2]
range = 3

[[pattern]]
sites = [-1, 0, 1]
polynomial = "a(1) a+(0) a(-1)"

[parameters]
sites = [3]
chains = [3, 5]
samples = 2
norm_orders = 2
decompositions = 4
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_susylat"));
    c.env_remove("SUSYLAT_JOBS");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn validate_prints_canonical_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "n.toml", NICOLAI);
    let out = bin().arg("validate").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["range"], 3);
    let canonical = write(dir.path(), "c.toml", v["canonical"].as_str().unwrap());
    let again = json(&bin().arg("validate").arg(&canonical).output().unwrap());
    assert_eq!(again["canonical"], v["canonical"]);
}

#[test]
fn semantic_errors_exit_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "bad.toml", &NICOLAI.replace("a(1) a+(0) a(-1)", "a(0) a+(0)"));
    let out = bin().arg("validate").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml:8:") && err.contains("even parity"), "{err}");

    let model = write(dir.path(), "syntax.toml", &NICOLAI.replace("a(1) a+(0) a(-1)", "a(1) a+(0) * * a(-1)"));
    let out = bin().arg("nilpotent").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nilpotency_failure_exits_one_with_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "dense.toml", &NICOLAI.replace("period = [2]", "period = [1]"));
    let out = bin().arg("nilpotent").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["status"], "fail");
    assert!(v["details"]["counterexample"].is_string());
}

#[test]
fn zero_model_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "zero.toml", "name = \"zero\"\ndim = 1\nperiod = [1]\nrange = 0\n\n[parameters]\nsites = [3]\nchains = [3]\n");
    let out = bin().arg("run").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(json(&out)["passed"], true);
}

#[test]
fn reports_are_byte_identical_without_timings() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "n.toml", NICOLAI);
    let run = |jobs: &str| {
        let out = bin()
            .env("SUSYLAT_JOBS", jobs)
            .args(["run", "--checks", "nilpotent,leibniz,face,states", "--no-timings"])
            .arg(&model)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        out.stdout
    };
    let a = run("1");
    let b = run("2");
    assert_eq!(a, b);
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["seed"], 7);
}

#[test]
fn spectrum_of_three_sites() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "n.toml", NICOLAI);
    let out = bin().args(["spectrum", "--region", "-1..1"]).arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let kernel = v["kernel_dim_even"].as_u64().unwrap() + v["kernel_dim_odd"].as_u64().unwrap();
    assert_eq!(kernel, 6);
    assert_eq!(v["doublets"].as_array().unwrap().len(), 1);
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 8);
}

#[test]
fn hamiltonian_exports_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "n.toml", NICOLAI);
    let mtx = dir.path().join("h.mtx");
    let out_json = dir.path().join("h.json");
    let out = bin()
        .args(["hamiltonian", "--region", "-2..2", "--export-mtx"])
        .arg(&mtx)
        .arg("--out")
        .arg(&out_json)
        .arg(&model)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&out_json).unwrap()).unwrap();
    assert_eq!(v["dim"], 32);
    let text = fs::read_to_string(&mtx).unwrap();
    assert!(text.starts_with("%%MatrixMarket matrix coordinate complex general\n32 32 "));
}

#[test]
fn charges_and_evolve() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "n.toml", NICOLAI);
    let v = json(&bin().args(["charges", "--region", "0..1"]).arg(&model).output().unwrap());
    assert_eq!(v["charges"].as_array().unwrap().len(), 2);

    let out = bin().args(["evolve", "--region", "-1..1", "--time", "0.5t0", "--tol", "1e-8"]).arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for key in ["t", "N", "tail_bound", "support", "polynomial"] {
        assert!(!v[key].is_null(), "{key}");
    }
    assert_eq!(v["N"], 62);
    assert!(v["tail_bound"].as_f64().unwrap() <= 1e-8);

    let out = bin().args(["evolve", "--region", "-1..1", "--time", "2"]).arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn case2_reports_residuals() {
    let out = bin().args(["case2", "--modes", "1", "--cutoff", "2", "--grid", "4096"]).output().unwrap();
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let v = json(&out);
    assert_eq!(v["check"], "case2");
    assert!(v["details"]["resolvent"]["max_exact"].as_f64().unwrap() < 1e-12);
    assert!(v["details"]["wick"]["pairing_residual"].as_f64().unwrap() < 1e-8);
}
