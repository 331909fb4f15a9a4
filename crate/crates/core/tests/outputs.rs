mod common;

use unitcap::runner::{read_results, run_sweep, ExperimentConfig, RunMetadata, SweepOptions};

use common::load_config;

#[test]
fn shipped_configs_round_trip() {
    for name in ["low_dim.toml", "high_dim.toml"] {
        let config = load_config(name);
        config.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&config.to_toml()).unwrap(), config, "{name}");
    }
    let high = load_config("high_dim.toml");
    assert_eq!(high.input_dim, 10_000);
    assert_eq!(high.inits.len(), 2);
}

#[test]
fn sweep_outputs_round_trip() {
    let mut config = ExperimentConfig::new(6);
    config.base_hidden_width = 8;
    config.size_factors = vec![0.5, 1.0, 2.0];
    config.replicates = 2;
    config.learning_rates = vec![0.1, 0.01];
    config.data.train_size = 200;
    config.data.validation_size = 100;
    config.data.test_size = 100;
    config.training.epochs = 5;

    let sweep = run_sweep(&config, SweepOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let meta = unitcap::runner::write_sweep(dir.path(), &sweep).unwrap();
    assert_eq!((meta.result_rows, meta.error_rows), (6, 0));
    assert_eq!(meta.summary_status, "ok");

    let rows = read_results(&dir.path().join("results.csv")).unwrap();
    assert_eq!(rows, sweep.rows());

    let text = std::fs::read_to_string(dir.path().join("run-metadata.json")).unwrap();
    let parsed: RunMetadata = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed, meta);

    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    let trends = std::fs::read_to_string(dir.path().join("trends.csv")).unwrap();
    assert_eq!(trends.lines().count(), 4);
    let history = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 6 * 5);
}
