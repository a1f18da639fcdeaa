//! End-to-end behavior of the `labelsift` binary.

use std::path::Path;
use std::process::{Command, Output};

use labelsift::NoiseRecord;
use serde_json::Value;

fn labelsift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labelsift"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a 150-row, three-species table in the usual iris layout.
fn write_iris_like(file: &Path) {
    let mut text = String::from("sepal_length,sepal_width,petal_length,petal_width,species\n");
    let species = ["setosa", "versicolor", "virginica"];
    for i in 0..150 {
        let k = i % 3;
        let jitter = ((i * 37) % 17) as f64 / 40.0;
        let base = [
            4.8 + k as f64,
            3.0 + 0.1 * k as f64,
            1.5 + 2.0 * k as f64,
            0.2 + 0.8 * k as f64,
        ];
        let row: Vec<String> = base.iter().map(|b| format!("{:.2}", b + jitter)).collect();
        text += &format!("{},{}\n", row.join(","), species[k]);
    }
    std::fs::write(file, text).unwrap();
}

/// Report JSON with the runtime field removed.
fn stable_report(file: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("runtime_seconds");
    v
}

#[test]
fn detect_on_iris_layout_returns_one_suspect() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("iris.csv");
    write_iris_like(&data);
    let report = dir.path().join("report.json");
    let csv = dir.path().join("report.csv");
    let out = labelsift(&[
        "detect",
        "--data",
        path(&data),
        "--label-column",
        "species",
        "--alpha",
        "0.01",
        "--seed",
        "7",
        "-o",
        path(&report),
        "--csv",
        path(&csv),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stable_report(&report);
    assert_eq!(v["n"], 150);
    assert_eq!(v["suspects"].as_array().unwrap().len(), 1);
    assert!(v["suspects"][0]["original_label"].is_string());
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(csv_text.lines().count(), 2);
    assert!(csv_text.starts_with("index,score,original_label"));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("selected: dense network"), "{stdout}");

    // A second run with the same seed writes the same report.
    let again = dir.path().join("again.json");
    let out = labelsift(&[
        "detect",
        "--data",
        path(&data),
        "--label-column",
        "species",
        "--alpha",
        "0.01",
        "--seed",
        "7",
        "-o",
        path(&again),
    ]);
    assert!(out.status.success());
    assert_eq!(stable_report(&report), stable_report(&again));
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("iris.csv");
    write_iris_like(&data);

    let out = labelsift(&[
        "detect",
        "--data",
        path(&data),
        "--label-column",
        "species",
        "--alpha",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[E_CONFIG]: "));
    assert_eq!(stderr(&out).lines().count(), 1);

    let out = labelsift(&["detect", "--alpha", "0.1"]);
    assert_eq!(out.status.code(), Some(1));

    let out = labelsift(&["detect", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[E_USAGE]: "));

    let missing = dir.path().join("missing.csv");
    let out = labelsift(&["detect", "--data", path(&missing), "--alpha", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error[E_IO]: "));

    let out = labelsift(&[
        "detect",
        "--data",
        path(&data),
        "--label-column",
        "nope",
        "--alpha",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));

    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "a,b,label\n1,x,p\n2,3,q\n").unwrap();
    let out = labelsift(&["detect", "--data", path(&broken), "--alpha", "0.5"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = labelsift(&["benchmark", "--synthetic", "blobs", "--runs", "0"]);
    assert_eq!(out.status.code(), Some(1));

    let out = labelsift(&[
        "inject",
        "--data",
        path(&data),
        "--label-column",
        "species",
        "--mu",
        "0.1",
        "--regime",
        "at-random",
        "-o",
        path(&dir.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = labelsift(&[
        "generate",
        "blobs",
        "--n",
        "20",
        "--d",
        "2",
        "--c",
        "3",
        "-o",
        path(&dir.path().join("g.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = labelsift(&["--threads", "0", "inspect", "--data", path(&data)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn inject_is_deterministic_and_records_flips() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs.csv");
    let out = labelsift(&[
        "generate",
        "blobs",
        "--n",
        "1000",
        "--d",
        "3",
        "--c",
        "4",
        "--seed",
        "2",
        "-o",
        path(&data),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let run = |name: &str| {
        let noisy = dir.path().join(name);
        let out = labelsift(&[
            "inject",
            "--data",
            path(&data),
            "--mu",
            "0.03",
            "--seed",
            "5",
            "-o",
            path(&noisy),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let record = NoiseRecord::load(dir.path().join(format!("{name}.record.json"))).unwrap();
        (std::fs::read(&noisy).unwrap(), record)
    };
    let (a, ra) = run("a.csv");
    let (b, rb) = run("b.csv");
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(ra.len(), 30);

    // Exactly the recorded rows changed label.
    let labels = |bytes: &[u8]| -> Vec<String> {
        String::from_utf8_lossy(bytes)
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().to_string())
            .collect()
    };
    let before = labels(&std::fs::read(&data).unwrap());
    let after = labels(&a);
    let changed: Vec<usize> = (0..before.len())
        .filter(|&i| before[i] != after[i])
        .collect();
    assert_eq!(changed, ra.flipped_indices);
}

#[test]
fn inject_writes_idx_labels_for_images() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let images = fixtures.join("mnist-5000-images.idx");
    let labels = fixtures.join("mnist-5000-labels.idx");
    let dir = tempfile::tempdir().unwrap();
    let noisy = dir.path().join("noisy.idx");
    let record = dir.path().join("record.json");
    let out = labelsift(&[
        "inject",
        "--images",
        path(&images),
        "--labels",
        path(&labels),
        "--mu",
        "0.01",
        "-o",
        path(&noisy),
        "--record",
        path(&record),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let original = labelsift::data::parse_idx_labels(&std::fs::read(&labels).unwrap()).unwrap();
    let flipped = labelsift::data::parse_idx_labels(&std::fs::read(&noisy).unwrap()).unwrap();
    let record = NoiseRecord::load(&record).unwrap();
    assert_eq!(record.len(), 50);
    let changed: Vec<usize> = (0..original.len())
        .filter(|&i| original[i] != flipped[i])
        .collect();
    assert_eq!(changed, record.flipped_indices);
}

#[test]
fn generate_is_deterministic_and_inspectable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for f in [&a, &b] {
        let out = labelsift(&[
            "generate",
            "classification",
            "--n",
            "300",
            "--d",
            "9",
            "--c",
            "3",
            "--seed",
            "4",
            "-o",
            path(f),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 301);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 10);

    let out = labelsift(&["inspect", "--data", path(&a)]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("instances: 300"), "{stdout}");
    assert!(stdout.contains("classes: 3"), "{stdout}");
}

#[test]
fn benchmark_prints_table_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("bench.json");
    let out = labelsift(&[
        "benchmark",
        "--synthetic",
        "blobs",
        "--n",
        "400",
        "--d",
        "3",
        "--c",
        "4",
        "--runs",
        "1",
        "--mu",
        "0.05",
        "--seed",
        "3",
        "-o",
        path(&report),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("synthetic blobs"), "{stdout}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["runs"], 1);
    assert_eq!(v["mean_precision"].as_array().unwrap().len(), 3);
}
