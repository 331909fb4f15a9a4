#![allow(dead_code)]

use std::path::PathBuf;

use unitcap::mlp::{build_mlp, InitDistribution, InitFamily, InitSpec, LayerParams, Mlp};
use unitcap::numerics::{DenseMatrix, SeededRng};
use unitcap::runner::{ExperimentConfig, SweepData};
use unitcap::training::{train, OptimizerKind, OptimizerSpec, TrainSpec};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_path(name)).expect("config loads")
}

pub fn normal_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.standard_normal()).collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

/// He-normal weights with N(0, 0.1²) biases.
pub fn random_net(input_dim: usize, hidden: &[usize], output_dim: usize, rng: &mut SeededRng) -> Mlp {
    let spec = InitSpec::new(InitFamily::He, InitDistribution::Normal);
    let net = build_mlp(input_dim, hidden, output_dim, &spec, rng).unwrap();
    let layers = net
        .into_layers()
        .into_iter()
        .map(|l| {
            let biases = (0..l.out_dim()).map(|_| rng.normal(0.0, 0.1)).collect();
            LayerParams::new(l.weights, biases).unwrap()
        })
        .collect();
    Mlp::new(layers).unwrap()
}

/// A student of hidden width `width` trained with momentum at a fixed rate.
pub fn trained_student(data: &SweepData, width: usize, seed: u64, learning_rate: f64) -> Mlp {
    let mut rng = SeededRng::new(seed);
    let init = build_mlp(
        data.train.input_dim(),
        &[width],
        2,
        &InitSpec::fixed_sigma(0.01),
        &mut rng,
    )
    .unwrap();
    let spec = TrainSpec {
        seed,
        validation_interval: 50,
        ..TrainSpec::default()
    };
    let opt = OptimizerSpec::new(OptimizerKind::momentum(), learning_rate);
    train(&init, data.train.examples(), None, &spec, &opt).unwrap().net
}
