use std::path::Path;
use std::process::{Command, Output};

use fy_core::bench::{BenchReport, SweepRow};
use fy_core::data::{parse_multilabel, DataStats, ParseOptions};
use fy_core::learn::{LinearModel, MetricReport};
use fy_core::margin::MarginReport;
use serde_json::Value;

fn fy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = fy(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn predict_sparsemax() {
    let v = ok_json(&["predict", "--loss", "sparsemax", "--theta", "1,0.5,-1"]);
    let p: Vec<f64> = serde_json::from_value(v["p"].clone()).unwrap();
    assert!((p[0] - 0.75).abs() < 1e-12);
    assert!((p[1] - 0.25).abs() < 1e-12);
    assert_eq!(p[2], 0.0);
}

#[test]
fn predict_entropy_spec_and_method() {
    let v = ok_json(&[
        "predict",
        "--entropy",
        r#"{"family":"tsallis","alpha":1.5}"#,
        "--method",
        "brent",
        "--tol",
        "1e-12",
        "--theta",
        "0.3,-0.2,1.1,0.0",
    ]);
    assert_eq!(v["method"], "brent");
    let p: Vec<f64> = serde_json::from_value(v["p"].clone()).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn predict_batch_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("theta.txt");
    std::fs::write(&input, "1,0,0\n# comment\n0 2 -1\n").unwrap();
    let out = fy(&[
        "predict",
        "--input",
        input.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 0);
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<Vec<f64>> = rdr.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn loss_json_and_csv() {
    let v = ok_json(&[
        "loss", "--loss", "logistic", "--theta", "0,0,0", "--y", "1,0,0",
    ]);
    assert!((v["value"].as_f64().unwrap() - 3f64.ln()).abs() < 1e-12);
    let out = fy(&[
        "loss",
        "--loss",
        "tsallis:2",
        "--theta",
        "1,0",
        "--y",
        "1,0",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 0);
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let row: Vec<f64> = rdr.deserialize().next().unwrap().unwrap();
    assert!(row[0].abs() < 1e-12);
}

#[test]
fn margin_report_parses() {
    let v = ok_json(&[
        "margin",
        "--entropy",
        r#"{"family":"tsallis","alpha":2}"#,
        "--grid",
        "10000",
        "--trials",
        "3",
    ]);
    let r: MarginReport = serde_json::from_value(v).unwrap();
    assert!((r.closed_form.to_f64() - 1.0).abs() < 1e-12);
    assert!((r.brute_force - 1.0).abs() < 1e-3);
}

#[test]
fn sweep_csv_parses() {
    let out = fy(&[
        "sweep", "--family", "tsallis", "--params", "1.5,2", "--points", "5", "--format", "csv",
    ]);
    assert_eq!(code(&out), 0);
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<SweepRow> = rdr.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows
        .iter()
        .all(|r| r.loss >= 0.0 && (0.0..=1.0).contains(&r.yhat1)));
}

#[test]
fn bench_report_parses() {
    let v = ok_json(&[
        "bench",
        "--dims",
        "10",
        "--trials",
        "2",
        "--warmups",
        "0",
        "--repeats",
        "1",
    ]);
    let r: BenchReport = serde_json::from_value(v).unwrap();
    assert_eq!(r.records.len(), 6);
    assert!(r.records.iter().all(|x| x.success));
}

fn write_synth(dir: &Path) -> String {
    let path = dir.join("synth.txt");
    let out = fy(&[
        "synth",
        "--n",
        "120",
        "--p",
        "15",
        "--d",
        "4",
        "--seed",
        "3",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path.to_str().unwrap().to_string()
}

#[test]
fn synth_stats_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synth(dir.path());
    let raw = parse_multilabel(Path::new(&data), &ParseOptions::default()).unwrap();
    assert_eq!(raw.len(), 120);

    let stats: DataStats = serde_json::from_value(ok_json(&["data", "stats", &data])).unwrap();
    assert_eq!((stats.n, stats.p, stats.d), (120, 15, 4));

    let model = dir.path().join("model.json");
    let report = ok_json(&[
        "train",
        "--data",
        &data,
        "--alphas",
        "1,2",
        "--lambdas",
        "1",
        "--model",
        model.to_str().unwrap(),
    ]);
    assert_eq!(report["grid"].as_array().unwrap().len(), 2);
    let m = LinearModel::from_json(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m.weights.dim(), (4, 15));
    assert!(m.feature_stats.is_some());

    let eval: MetricReport = serde_json::from_value(ok_json(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--data",
        &data,
    ]))
    .unwrap();
    assert_eq!(eval.n, 120);
    assert!(eval.mean_js.is_finite() && eval.mean_js >= 0.0);
}

#[test]
fn synth_is_seeded() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let x = std::fs::read(write_synth(a.path())).unwrap();
    let y = std::fs::read(write_synth(b.path())).unwrap();
    assert_eq!(x, y);
}

#[test]
fn domain_errors_exit_2() {
    assert_eq!(code(&fy(&["predict", "--loss", "nope", "--theta", "1"])), 2);
    assert_eq!(
        code(&fy(&["predict", "--loss", "tsallis:0.5", "--theta", "1,2"])),
        2
    );
    assert_eq!(code(&fy(&["loss", "--theta", "1,2", "--y", "1,0,0"])), 2);
    assert_eq!(
        code(&fy(&["predict", "--entropy", "{not json", "--theta", "1"])),
        2
    );
}

#[test]
fn parse_error_exit_2_and_missing_file_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0 3:x\n").unwrap();
    assert_eq!(code(&fy(&["data", "stats", bad.to_str().unwrap()])), 2);
    let missing = dir.path().join("missing.txt");
    assert_eq!(code(&fy(&["data", "stats", missing.to_str().unwrap()])), 1);
}

#[test]
fn no_convergence_exits_3() {
    let spec = r#"{"regularizer":{"entropy":{"family":"tsallis","alpha":1.5}},
        "solver":{"method":"projected_gradient","tolerance":1e-12,"max_iterations":2}}"#;
    let out = fy(&["predict", "--loss", spec, "--theta", "0.31,-0.27,1.13,0.02"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn spec_style_flags() {
    let v = ok_json(&[
        "predict",
        "--entropy",
        "tsallis",
        "--alpha",
        "1.5",
        "--scores",
        "0.2,0.1,-0.3",
        "--solver",
        "bisect",
    ]);
    assert_eq!(v["method"], "bisection");
    let v = ok_json(&[
        "loss",
        "--spec",
        "sparsemax",
        "--scores",
        "2,0",
        "--target",
        "1,0",
    ]);
    assert_eq!(v["value"].as_f64().unwrap(), 0.0);
    let v = ok_json(&[
        "margin",
        "--entropy",
        "norm",
        "--q",
        "2",
        "--grid",
        "1000",
        "--trials",
        "2",
    ]);
    assert!((v["closed_form"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(
        code(&fy(&["predict", "--entropy", "tsallis", "--scores", "1,0"])),
        2
    );
}
