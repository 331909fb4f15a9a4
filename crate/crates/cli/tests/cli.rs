use std::path::Path;
use std::process::{Command, Output};

use unitcap::mlp::{write_model, LayerParams, Mlp, ModelMeta};
use unitcap::numerics::{DenseMatrix, SeededRng};

fn unitcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unitcap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = unitcap(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn mean_auc(stdout: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("mean_auc "))
        .expect("mean_auc line")
        .parse()
        .unwrap()
}

#[test]
fn zero_outgoing_model_is_fully_removable() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["gen-data", "--input-dim", "10", "--out", p(&data)]);

    let mut rng = SeededRng::new(4);
    let weights = DenseMatrix::new(16, 10, (0..160).map(|_| rng.standard_normal()).collect()).unwrap();
    let hidden = LayerParams::new(weights, vec![0.1; 16]).unwrap();
    let output = LayerParams::new(DenseMatrix::zeros(2, 16), vec![0.3, -0.2]).unwrap();
    let net = Mlp::new(vec![hidden, output]).unwrap();
    let model = dir.path().join("zero.json");
    let meta = ModelMeta {
        network_id: "zero".into(),
        ..ModelMeta::default()
    };
    write_model(&model, &net, &meta).unwrap();

    let out = dir.path().join("ablate");
    let stdout = ok(&[
        "ablate",
        "--model",
        p(&model),
        "--data",
        p(&data.join("test.csv")),
        "--out",
        p(&out),
    ]);
    assert_eq!(mean_auc(&stdout), 1.0);
    let auc = std::fs::read_to_string(out.join("auc.csv")).unwrap();
    assert!(auc.starts_with("network_id,layer,auc\n"), "{auc}");
    assert!(out.join("curves.csv").exists());
}

#[test]
fn eta_construction_is_less_removable_than_duplicate_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["gen-data", "--input-dim", "10", "--out", p(&data)]);
    for f in ["train.csv", "validation.csv", "test.csv", "teacher.json", "datasets.json"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let student = dir.path().join("student");
    let stdout = ok(&["train", "--input-dim", "10", "--learning-rate", "0.03", "--out", p(&student)]);
    assert!(stdout.starts_with("learning_rate 0.03 "));
    let model = student.join("model.json");
    let test = data.join("test.csv");

    let dz = dir.path().join("dz");
    let eta = dir.path().join("eta");
    ok(&["construct", "--model", p(&model), "--kind", "duplicate-zero", "--out", p(&dz)]);
    ok(&["construct", "--model", p(&model), "--kind", "eta", "--eta", "100", "--out", p(&eta)]);
    let text = std::fs::read_to_string(eta.join("model.json")).unwrap();
    assert!(text.contains("\"recipe\":\"eta_duplicate\""));

    let auc = |m: &Path, out: &str| {
        mean_auc(&ok(&[
            "ablate",
            "--model",
            p(&m.join("model.json")),
            "--data",
            p(&test),
            "--seed",
            "3",
            "--out",
            p(&dir.path().join(out)),
        ]))
    };
    let dz_auc = auc(&dz, "ablate-dz");
    let eta_auc = auc(&eta, "ablate-eta");
    assert!(eta_auc < dz_auc, "eta {eta_auc} vs duplicate-zero {dz_auc}");

    let merged = dir.path().join("merged");
    ok(&[
        "construct",
        "--model",
        p(&dz.join("model.json")),
        "--kind",
        "merge",
        "--keep",
        "0",
        "--remove",
        "128",
        "--data",
        p(&test),
        "--out",
        p(&merged),
    ]);
    let refused = unitcap(&[
        "construct",
        "--model",
        p(&model),
        "--kind",
        "merge",
        "--keep",
        "0",
        "--remove",
        "1",
        "--data",
        p(&test),
        "--out",
        p(&dir.path().join("refused")),
    ]);
    assert!(!refused.status.success());
    assert!(String::from_utf8_lossy(&refused.stderr).starts_with("error: "));

    let corr = ok(&["correlate", "--model", p(&dz.join("model.json")), "--data", p(&test), "--out", p(&dir.path().join("corr"))]);
    assert!(corr.starts_with("mean_similarity "));
}

#[test]
fn single_cell_sweep_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("one.toml");
    std::fs::write(
        &config,
        "input_dim = 10\nsize_factors = [1]\nreplicates = 1\nlearning_rates = [0.03]\n",
    )
    .unwrap();
    let out = dir.path().join("sweep");
    let stdout = ok(&["sweep", "--config", p(&config), "--out", p(&out)]);
    assert!(stdout.starts_with("1 result rows (0 errors)"), "{stdout}");

    let mut reader = csv::Reader::from_path(out.join("results.csv")).unwrap();
    assert_eq!(reader.records().count(), 1);
    for f in ["curves.csv", "correlations.csv", "history.csv", "tuning.csv", "run-metadata.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!out.join("summary.csv").exists());

    let summary = unitcap(&["summarize", "--results", p(&out), "--out", p(&dir.path().join("s"))]);
    assert!(!summary.status.success());
}

#[test]
fn missing_recipe_parameter_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = unitcap(&[
        "construct",
        "--model",
        p(&dir.path().join("absent.json")),
        "--kind",
        "eta",
        "--out",
        p(dir.path()),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}
