mod common;

use unitcap::constructions::{widen_duplicate_zero, widen_eta, widen_uncorrelated};
use unitcap::mlp::{AblationMask, Mlp};
use unitcap::numerics::{pearson_abs, SeededRng};
use unitcap::removability::{ablation_curve, baseline_labels, default_grid, unchanged_proportion};
use unitcap::repetition::{correlation_summary, harvest_activations};
use unitcap::runner::{prepare_data, SweepData};
use unitcap::training::{train, OptimizerKind, OptimizerSpec, TrainSpec};

use common::{load_config, trained_student};

fn setup() -> (SweepData, Mlp) {
    let data = prepare_data(&load_config("low_dim.toml")).unwrap();
    let net = trained_student(&data, 128, 11, 0.03);
    (data, net)
}

#[test]
fn training_lowers_loss() {
    let data = prepare_data(&load_config("low_dim.toml")).unwrap();
    let mut rng = SeededRng::new(3);
    let init = unitcap::mlp::build_mlp(10, &[128], 2, &unitcap::mlp::InitSpec::fixed_sigma(0.01), &mut rng).unwrap();
    let opt = OptimizerSpec::new(OptimizerKind::momentum(), 0.03);
    let out = train(&init, data.train.examples(), Some(data.validation.examples()), &TrainSpec::default(), &opt).unwrap();
    assert_eq!(out.history.len(), 50);
    assert!(out.history[49].train_loss < out.history[0].train_loss);
    assert!(out.history[49].val_acc.unwrap() > 0.8);
}

#[test]
fn eta_widening_is_less_removable() {
    let (data, net) = setup();
    let x = &data.test.inputs;
    let grid = default_grid();
    let rng = SeededRng::new(5);
    let duplicate = ablation_curve(&widen_duplicate_zero(&net).unwrap(), x, 0, &grid, 5, &rng).unwrap();
    let eta = ablation_curve(&widen_eta(&net, 100.0).unwrap(), x, 0, &grid, 5, &rng).unwrap();
    let source = ablation_curve(&net, x, 0, &grid, 5, &rng).unwrap();
    assert!(eta.auc().unwrap() < source.auc().unwrap());
    assert!(eta.auc().unwrap() < duplicate.auc().unwrap());
}

#[test]
fn duplicate_columns_repeat_originals() {
    let (data, net) = setup();
    let wide = widen_duplicate_zero(&net).unwrap();
    let acts = harvest_activations(&wide, &data.test.inputs, 0).unwrap();
    for u in 0..128 {
        assert_eq!(acts.matrix.column(u), acts.matrix.column(u + 128));
    }
}

#[test]
fn uncorrelated_pads_are_weakly_correlated() {
    let (data, net) = setup();
    let wide = widen_uncorrelated(&net, 9).unwrap();
    let acts = wide.hidden_activations(&data.test.inputs, 0).unwrap();
    let mut total = 0.0;
    let mut count = 0;
    for pad in 128..256 {
        for orig in 0..128 {
            if let Some(r) = pearson_abs(&acts.column(pad), &acts.column(orig)).unwrap() {
                total += r;
                count += 1;
            }
        }
    }
    assert!(count > 0);
    assert!(total / (count as f64) < 0.3, "mean |r| {}", total / count as f64);
}

#[test]
fn eta_copies_are_repeated_but_not_removable() {
    let (data, net) = setup();
    let x = &data.test.inputs;
    let wide = widen_eta(&net, 100.0).unwrap();
    let baseline = baseline_labels(&wide, x).unwrap();
    assert_eq!(baseline, baseline_labels(&net, x).unwrap());

    let logits = net.forward_batch(x, None).unwrap();
    let acts = net.hidden_activations(x, 0).unwrap();
    let w = &net.layers()[1].weights;
    let mut flipped_rows = 0;
    for k in 0..128 {
        // Ablating the second copy of unit k moves z0 - z1 by (2η - (w0k - w1k)/2)·u_k.
        let slope = 2.0 * 100.0 - (w.get(0, k) - w.get(1, k)) / 2.0;
        let predicted = (0..x.rows())
            .filter(|&r| {
                let d = logits.get(r, 0) - logits.get(r, 1);
                let moved = d + slope * acts.get(r, k);
                (d > 0.0) != (moved > 0.0)
            })
            .count();
        let mask = AblationMask::for_units(&wide, 0, &[k + 128]).unwrap();
        let unchanged = unchanged_proportion(&wide, x, &baseline, &mask).unwrap();
        let measured = x.rows() - (unchanged * x.rows() as f64).round() as usize;
        assert_eq!(measured, predicted, "unit {k}");
        flipped_rows += measured;
    }
    assert!(flipped_rows > 0);

    let mut rng = SeededRng::new(1);
    let summary = correlation_summary(&harvest_activations(&wide, x, 0).unwrap(), 0.5, 50_000, &mut rng).unwrap();
    assert!(summary.similarity >= 1.0);
    let live = 256 - summary.dead_unit_count;
    assert!(summary.pairs_above >= live / 2);
}
