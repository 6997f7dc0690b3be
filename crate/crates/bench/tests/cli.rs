use std::path::Path;
use std::process::{Command, Output};

use kronsense::models::{seeded_rng, unit_column_matrix, KronDims, SparseInstance, SparsityModel};
use kronsense::Matrix;
use kronsense_bench::harness::TrialRecord;
use kronsense_bench::output::{read_csv, read_records, write_csv};

fn kronsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kronsense")).args(args).output().unwrap()
}

fn write_matrix(path: &Path, m: &Matrix) {
    std::fs::write(path, m.to_csv()).unwrap();
}

fn instance_files(dir: &Path) -> SparseInstance {
    let dims = KronDims::new(6, 8, 6, 8).unwrap();
    let model = SparsityModel::hierarchical(2, 2, dims.layout()).unwrap();
    let inst = SparseInstance::generate(dims, &model, f64::INFINITY, &mut seeded_rng(6000)).unwrap();
    write_matrix(&dir.join("h1.csv"), &inst.h1);
    write_matrix(&dir.join("h2.csv"), &inst.h2);
    write_matrix(&dir.join("y.csv"), &Matrix::new(inst.y.len(), 1, inst.y.to_vec()).unwrap());
    inst
}

fn arg(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn solve_recovers_noiseless_instance() {
    let dir = tempfile::tempdir().unwrap();
    let inst = instance_files(dir.path());
    let (h1, h2, y) = (arg(dir.path(), "h1.csv"), arg(dir.path(), "h2.csv"), arg(dir.path(), "y.csv"));
    let out = kronsense(&["solve", "--h1", &h1, "--h2", &h2, "--y", &y, "--model", "hier", "--s1", "2", "--s2", "2", "--algo", "tsr-omp"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let x_hat = Matrix::from_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(x_hat.shape(), (64, 1));
    let err: f64 = inst.x.iter().zip(x_hat.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
    assert!(err < 1e-12 * inst.x.iter().map(|v| v * v).sum::<f64>());
}

#[test]
fn solve_accepts_measurement_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let inst = instance_files(dir.path());
    write_matrix(&dir.path().join("ymat.csv"), &Matrix::unvec(&inst.y, 6, 6).unwrap());
    let (h1, h2) = (arg(dir.path(), "h1.csv"), arg(dir.path(), "h2.csv"));
    let run = |y: &str| {
        let out = kronsense(&["solve", "--h1", &h1, "--h2", &h2, "--y", y, "--model", "hier", "--s1", "2", "--s2", "2", "--algo", "omp"]);
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run(&arg(dir.path(), "y.csv")), run(&arg(dir.path(), "ymat.csv")));
}

#[test]
fn solve_reports_missing_sparsity() {
    let dir = tempfile::tempdir().unwrap();
    instance_files(dir.path());
    let (h1, h2, y) = (arg(dir.path(), "h1.csv"), arg(dir.path(), "h2.csv"), arg(dir.path(), "y.csv"));
    let out = kronsense(&["solve", "--h1", &h1, "--h2", &h2, "--y", &y, "--model", "standard", "--algo", "omp"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--s"));
}

#[test]
fn ric_prints_bound_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded_rng(3);
    write_matrix(&dir.path().join("a.csv"), &unit_column_matrix(4, 6, &mut rng));
    write_matrix(&dir.path().join("b.csv"), &unit_column_matrix(4, 6, &mut rng));
    let (a, b) = (arg(dir.path(), "a.csv"), arg(dir.path(), "b.csv"));
    let out = kronsense(&["ric", "--h1", &a, "--h2", &b, "--model", "kron", "--s1", "2", "--s2", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let empirical = report["empirical"].as_f64().unwrap();
    assert!(empirical <= report["theorem1_bound"].as_f64().unwrap() + 1e-10);
    assert_eq!(report["theorem1_bound"], report["prior_bound"]);
}

#[test]
fn ric_enumeration_cap_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded_rng(3);
    write_matrix(&dir.path().join("a.csv"), &unit_column_matrix(4, 6, &mut rng));
    let a = arg(dir.path(), "a.csv");
    let out = kronsense(&["ric", "--h1", &a, "--h2", &a, "--model", "standard", "--s", "3", "--cap", "10"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bench_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"dims": {"m1": 6, "n1": 8, "m2": 6, "n2": 8}}"#).unwrap();
    let out = kronsense(&["bench", "--config", &cfg.to_string_lossy(), "--out", &arg(dir.path(), "out")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_writes_parseable_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/desk-hier.json");
    let out_dir = dir.path().join("out");
    let out = kronsense(&["bench", "--config", &cfg.to_string_lossy(), "--out", &out_dir.to_string_lossy(), "--trials", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = read_records(&out_dir.join("records.csv")).unwrap();
    assert_eq!(records.len(), 6 * 8);
    assert!(out_dir.join("summary.csv").exists() && out_dir.join("config.json").exists());

    let copy = dir.path().join("copy.csv");
    write_csv(&copy, &records).unwrap();
    let again: Vec<TrialRecord> = read_csv(&copy).unwrap();
    assert_eq!(records, again);
}
