use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn sparx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparx")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = sparx(args);
    assert!(
        out.status.success(),
        "sparx {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// A small model trained once on the bundled three-class data.
fn model() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    let dir = DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("model.json");
        ok(&[
            "train",
            "--data",
            data("gaussian3.csv").to_str().unwrap(),
            "--hidden",
            "8,8",
            "--epochs",
            "100",
            "--out",
            out.to_str().unwrap(),
        ]);
        dir
    });
    Box::leak(dir.path().join("model.json").into_boxed_path())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let mut rows = vec![header];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

#[test]
fn train_fits_xor() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("xor.json");
    let text = ok(&[
        "train",
        "--data",
        s(&data("xor.csv")),
        "--hidden",
        "8",
        "--epochs",
        "500",
        "--batch",
        "4",
        "--lr",
        "0.1",
        "--test-fraction",
        "0",
        "--out",
        s(&out),
    ]);
    assert!(text.contains("training accuracy 1.0000"), "{text}");
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(model["layer_sizes"], serde_json::json!([2, 8, 2]));
}

#[test]
fn missing_label_column_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sparx(&[
        "train",
        "--data",
        s(&data("xor.csv")),
        "--label",
        "target",
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("target"));
}

#[test]
fn local_mode_needs_an_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let out = sparx(&[
        "explain",
        "--model",
        s(model()),
        "--data",
        s(&data("gaussian3.csv")),
        "--mode",
        "local",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn explain_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "explain",
        "--model",
        s(model()),
        "--data",
        s(&data("gaussian3.csv")),
        "--mode",
        "local",
        "--anchor",
        "70",
        "--samples",
        "200",
        "--out",
        s(dir.path()),
    ]);
    for f in [
        "clustered_model.json",
        "clustered_model.sidecar.json",
        "qaf.json",
        "qaf.dot",
        "strengths.json",
        "wordcloud.json",
        "report.csv",
        "run.json",
    ] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let dot = fs::read_to_string(dir.path().join("qaf.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("clustered_model.sidecar.json")).unwrap()).unwrap();
    assert_eq!(sidecar["mode"], "local");
    assert_eq!(sidecar["local_estimator"], "least-squares");
}

#[test]
fn explain_accepts_a_feature_vector_anchor() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "explain",
        "--model",
        s(model()),
        "--data",
        s(&data("gaussian3.csv")),
        "--mode",
        "local",
        "--anchor",
        "5.9,2.8,4.3,1.3",
        "--samples",
        "100",
        "--out",
        s(dir.path()),
    ]);
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(run["anchor"], serde_json::json!([5.9, 2.8, 4.3, 1.3]));
    assert!(run["anchor_row"].is_null());
}

#[test]
fn ratio_zero_row_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "evaluate",
        "--model",
        s(model()),
        "--data",
        s(&data("gaussian3.csv")),
        "--ratio",
        "0",
        "--anchor",
        "0,80",
        "--samples",
        "100",
        "--out",
        s(dir.path()),
    ]);
    let rows = read_csv(&dir.path().join("report.csv"));
    assert_eq!(
        rows[0],
        [
            "dataset",
            "ratio",
            "seed",
            "method",
            "global_io",
            "local_io",
            "global_structural",
            "local_structural",
            "omega",
            "kernel_width",
            "n_samples"
        ]
    );
    let sparx_row = rows.iter().find(|r| r[3] == "sparx").unwrap();
    // Global metrics are exact; local weights are re-estimated from samples
    // and agree to rounding.
    for col in [4, 6] {
        assert_eq!(sparx_row[col].parse::<f64>().unwrap(), 0.0, "column {}", rows[0][col]);
    }
    for col in [5, 7] {
        assert!(
            sparx_row[col].parse::<f64>().unwrap() <= 1e-12,
            "column {}",
            rows[0][col]
        );
    }
    assert_eq!(sparx_row[8], "64");
}

#[test]
fn default_grid_and_baseline_rows() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "evaluate".to_string(),
            "--model".into(),
            s(model()).into(),
            "--data".into(),
            s(&data("gaussian3.csv")).into(),
            "--anchor".into(),
            "3,90".into(),
            "--samples".into(),
            "100".into(),
            "--out".into(),
            s(out).into(),
        ]
    };
    let with = dir.path().join("with");
    let a = args(&with);
    ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    let rows = read_csv(&with.join("report.csv"));
    let methods: Vec<&str> = rows[1..].iter().map(|r| r[3].as_str()).collect();
    assert_eq!(methods, ["sparx", "sparx", "sparx", "sparx", "ridge"]);
    let ratios: Vec<&str> = rows[1..5].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(ratios, ["0.2", "0.4", "0.6", "0.8"]);
    assert_eq!(rows[5][1], "");

    let without = dir.path().join("without");
    let mut b = args(&without);
    b.push("--no-baseline".into());
    ok(&b.iter().map(String::as_str).collect::<Vec<_>>());
    let rows = read_csv(&without.join("report.csv"));
    assert!(rows[1..].iter().all(|r| r[3] == "sparx"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "explain",
            "--model",
            s(model()),
            "--data",
            s(&data("gaussian3.csv")),
            "--mode",
            "local",
            "--anchor",
            "12",
            "--samples",
            "150",
            "--seed",
            "7",
            "--out",
            s(&out),
        ]);
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read(&p).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };
    let (a, b) = (run("a"), run("b"));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn check_equivalence_passes_on_a_trained_model() {
    let text = ok(&[
        "check-equivalence",
        "--model",
        s(model()),
        "--data",
        s(&data("gaussian3.csv")),
        "--ratio",
        "0.5",
    ]);
    assert!(!text.is_empty());
}

#[test]
fn bad_ratio_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = sparx(&[
        "explain",
        "--model",
        s(model()),
        "--data",
        s(&data("gaussian3.csv")),
        "--ratio",
        "1.5",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
