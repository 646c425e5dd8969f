use std::path::Path;
use std::process::{Command, Output};

use onebit_gcs::harness::read_csv;

fn onebit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onebit"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        r#"
seed = 9
trials = 3
m_grid = [40, 80]
solvers = ["pgd1bit", "biht", "lasso", "lasso1bit"]

[model]
kind = "group_sparse"
n = 24
k = 3

[noise]
kind = "sign_flip"
p = 0.02

[settings.biht]
sparsity = 3
"#,
    )
    .unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = onebit(&["sweep", "--config", "/definitely/not/here.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not/here.toml"));
}

#[test]
fn unknown_subcommand_and_bad_flags_exit_1() {
    assert_eq!(onebit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(onebit(&["verify", "lemma99"]).status.code(), Some(1));
    assert_eq!(
        onebit(&["measure", "--m", "x", "--input", "-"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(onebit(&["--help"]).status.code(), Some(0));
}

#[test]
fn sign_flip_verifier_reports_json() {
    let out = onebit(&["verify", "lemma4", "--trials", "100000", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["trials"], 100_000);
    assert_eq!(v["pairs"].as_array().unwrap().len(), 20);
    assert!(v["failures"].as_u64().unwrap() <= 1);
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let res = onebit(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(
            res.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let parsed = read_csv(bytes.as_slice()).unwrap();
    assert_eq!(parsed.rows.len(), 2 * 4 * 3);
    assert_eq!(parsed.aggregates.len(), 2 * 4);
    assert!(dir.path().join("a.csv.meta.json").exists());

    let reseeded = dir.path().join("c.csv");
    onebit(&[
        "sweep",
        "--config",
        &cfg,
        "--seed",
        "10",
        "--out",
        reseeded.to_str().unwrap(),
    ]);
    assert_ne!(bytes, std::fs::read(&reseeded).unwrap());
}

#[test]
fn measure_and_project_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.txt");
    std::fs::write(&x, "0.6 0 0 0 0 0.8").unwrap();
    let matrix = dir.path().join("a.bin");
    let out = onebit(&[
        "--json",
        "--seed",
        "3",
        "measure",
        "--m",
        "16",
        "--input",
        x.to_str().unwrap(),
        "--save-matrix",
        matrix.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let bits = v["bits"].as_array().unwrap();
    assert_eq!(bits.len(), 16);
    let a = onebit_gcs::measure::MeasurementEnsemble::read_binary(&matrix).unwrap();
    let expected =
        onebit_gcs::measure::sign_measure(&a, &ndarray::array![0.6, 0., 0., 0., 0., 0.8]).unwrap();
    let got: Vec<i8> = bits.iter().map(|b| b.as_i64().unwrap() as i8).collect();
    assert_eq!(got, expected.bits());

    let out = onebit(&[
        "--json",
        "project",
        "--model",
        "group-sparse:n=6,k=2",
        "--input",
        x.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["x"].as_array().unwrap().len(), 6);

    let short = dir.path().join("short.txt");
    std::fs::write(&short, "[1, 2]").unwrap();
    let out = onebit(&[
        "project",
        "--model",
        "group-sparse:n=6,k=2",
        "--input",
        short.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
