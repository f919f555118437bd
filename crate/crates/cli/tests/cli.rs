use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn oam_epr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oam-epr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = oam_epr(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(2)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn files(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn identical_runs_give_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = dir.path().join("spec.csv");
        ok(&[
            "spectrum",
            "--family1",
            "rect",
            "--family2",
            "rect",
            "--out",
            out.to_str().unwrap(),
        ]);
        let out = dir.path().join("sweep.csv");
        ok(&[
            "gamma-sweep",
            "--gammas",
            "1,3",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.len(), 5);
    assert_eq!(fa, fb);
}

#[test]
fn every_file_starts_with_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    ok(&[
        "aperture",
        "--family1",
        "tsg",
        "--gamma",
        "3",
        "--out",
        &out("ap.csv"),
    ]);
    ok(&["convolve", "--out", &out("conv.csv")]);
    ok(&["spectrum", "--out", &out("spec.csv")]);
    ok(&[
        "variance-series",
        "--family1",
        "gauss",
        "--family2",
        "gauss",
        "--out",
        &out("var.csv"),
    ]);
    ok(&["gamma-sweep", "--gammas", "2", "--out", &out("sweep.csv")]);
    ok(&["criterion", "--format", "csv", "--out", &out("crit.csv")]);
    let all = files(dir.path());
    let names: Vec<&str> = all.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "ap.csv",
            "ap_p2.csv",
            "conv.csv",
            "crit.csv",
            "spec.csv",
            "spec_analytic.csv",
            "sweep.csv",
            "sweep_gamma2.csv",
            "var.csv"
        ]
    );
    for (name, body) in &all {
        assert!(body.starts_with("# oam-epr "), "{name}");
        assert_eq!(
            body.lines().next().unwrap().matches("grid_n=512").count(),
            1,
            "{name}"
        );
    }
}

#[test]
fn rect_spectrum_columns_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spec.csv");
    ok(&[
        "spectrum",
        "--family1",
        "rect",
        "--family2",
        "rect",
        "--out",
        out.to_str().unwrap(),
    ]);
    let numeric = rows(&fs::read_to_string(&out).unwrap());
    let analytic = rows(&fs::read_to_string(dir.path().join("spec_analytic.csv")).unwrap());
    assert_eq!(numeric.len(), 129);
    for (n, a) in numeric.iter().zip(&analytic) {
        assert_eq!(n[0], a[0]);
        let (x, y): (f64, f64) = (n[1].parse().unwrap(), a[1].parse().unwrap());
        assert!((x - y).abs() < 1e-8, "m = {}: {x} vs {y}", n[0]);
    }
}

#[test]
fn gauss_series_converges() {
    let csv = ok(&[
        "variance-series",
        "--family1",
        "gauss",
        "--family2",
        "gauss",
    ]);
    let rows = rows(&csv);
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r[2] == "converged"));
    let last: f64 = rows[7][1].parse().unwrap();
    assert!((last - 0.8074).abs() < 1e-3);
}

#[test]
fn analytic_rect_series_diverges() {
    let csv = ok(&["variance-series", "--source", "analytic"]);
    let rows = rows(&csv);
    assert_eq!(rows.last().unwrap()[0], "1024");
    assert_eq!(rows[0][2], "log_divergent");
}

#[test]
fn gamma_sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    ok(&["gamma-sweep", "--out", out.to_str().unwrap()]);
    let summary = rows(&fs::read_to_string(&out).unwrap());
    let gammas: Vec<&str> = summary.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(gammas, ["1", "3", "5", "20", "80"]);
    assert_eq!(summary[1][1], "converged");
    assert_ne!(summary[4][1], "log_divergent");

    let gauss = rows(&ok(&[
        "variance-series",
        "--family1",
        "gauss",
        "--family2",
        "gauss",
    ]));
    let gamma1 = rows(&fs::read_to_string(dir.path().join("sweep_gamma1.csv")).unwrap());
    for (g, t) in gauss.iter().zip(&gamma1) {
        let (x, y): (f64, f64) = (g[1].parse().unwrap(), t[1].parse().unwrap());
        assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
}

#[test]
fn gauss_criterion_verdict() {
    let json = ok(&[
        "criterion",
        "--model",
        "perfect",
        "--family1",
        "gauss",
        "--family2",
        "gauss",
    ]);
    let v: Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["verdict"], true);
    assert_eq!(v["lhs"], 0.0);
    assert_eq!(v["classification"], "converged");
    assert_eq!(v["rhs_at_tau"].as_array().unwrap().len(), 8);
}

#[test]
fn table_model_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.json");
    fs::write(
        &table,
        r#"{"-1": {"weight": 0.5, "conditional": {"0": 0.5, "2": 0.5}},
            "1": {"weight": 0.5, "conditional": {"-2": 0.5, "0": 0.5}}}"#,
    )
    .unwrap();
    let model = format!("table:{}", table.display());
    let v: Value = serde_json::from_str(&ok(&[
        "criterion",
        "--model",
        &model,
        "--family1",
        "gauss",
        "--family2",
        "gauss",
    ]))
    .unwrap();
    assert_eq!(v["lhs"], 1.0);
    assert_eq!(v["verdict"], false);
    assert_eq!(v["inputs"]["model"]["kind"], "table");
}

#[test]
fn json_format_for_tables() {
    let v: Value =
        serde_json::from_str(&ok(&["spectrum", "--m-max", "4", "--format", "json"])).unwrap();
    assert_eq!(v["columns"], serde_json::json!(["m", "c", "c_squared"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 9);
    assert!(v["record"].as_str().unwrap().starts_with("oam-epr "));
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| oam_epr(args).status.code();
    assert_eq!(code(&["spectrum", "--w1", "7"]), Some(2));
    assert_eq!(code(&["spectrum", "--m-max", "500"]), Some(2));
    assert_eq!(code(&["convolve", "--family1", "disk"]), Some(2));
    assert_eq!(code(&["convolve", "--grid-n", "500"]), Some(2));
    assert_eq!(code(&["criterion", "--tau-grid", "3"]), Some(2));
    assert_eq!(code(&["criterion", "--model", "partial"]), Some(2));
    assert_eq!(code(&["gamma-sweep", "--gammas", "0.5"]), Some(2));
    assert_eq!(
        code(&[
            "variance-series",
            "--source",
            "analytic",
            "--family1",
            "tsg"
        ]),
        Some(2)
    );
    assert_eq!(
        code(&["convolve", "--out", "/nonexistent-dir/conv.csv"]),
        Some(1)
    );

    let err = String::from_utf8(oam_epr(&["spectrum", "--w1", "7"]).stderr).unwrap();
    assert!(err.contains("w = 7"), "{err}");
}
