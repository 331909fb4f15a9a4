//! Exact network transformations.
//!
//! The widenings double the last hidden layer without changing the network's
//! labels, while controlling whether the new units are removable, repeated,
//! or both. [`merge_repeated`] goes the other way: it deletes a unit whose
//! activation is a positive multiple of another's and folds its outgoing
//! weights into the survivor.
//!
//! Merge convention: if `u_j = γ·u_i` then `w_i·u_i + w_j·u_j = (w_i + γ·w_j)·u_i`,
//! so unit `j` can be removed after setting `w'_i = w_i + γ·w_j`. Stated the
//! other way round (`u_i = γ·u_j`), the same update is off by a factor of γ².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{ConstructionProvenance, LayerParams, Mlp};
use crate::numerics::{DenseMatrix, SeededRng};

/// Largest |η| accepted by [`widen_eta`].
pub const ETA_CAP: f64 = 1e6;
/// Standard deviation of the incoming weights of uncorrelated pad units.
pub const UNCORRELATED_PAD_SIGMA: f64 = 0.5;
/// Bias of padded dead units; with zero incoming weights their ReLU output is 0.
pub const DEAD_UNIT_BIAS: f64 = -1.0;
/// Relative tolerance of the `u_j = γ·u_i` check in [`merge_repeated`].
pub const MERGE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WideningRecipe {
    /// `[u, u]` with output weights `[w, 0]`.
    DuplicateZero,
    /// `[u, 0]`: padded units never fire.
    DeadUnits,
    /// `[u, v]` with random active `v` and zero output weights.
    UncorrelatedPad { pad_seed: u64 },
    /// `[u, u]` with output weights `[w/2 + s_c·η, w/2 − s_c·η]`, where
    /// `s_c` alternates `+1, −1, …` over output logits.
    EtaDuplicate { eta: f64 },
}

impl WideningRecipe {
    pub fn label(&self) -> &'static str {
        match self {
            Self::DuplicateZero => "duplicate_zero",
            Self::DeadUnits => "dead_units",
            Self::UncorrelatedPad { .. } => "uncorrelated_pad",
            Self::EtaDuplicate { .. } => "eta_duplicate",
        }
    }

    pub fn apply(&self, net: &Mlp) -> Result<Mlp> {
        match *self {
            Self::DuplicateZero => widen_duplicate_zero(net),
            Self::DeadUnits => widen_dead_units(net),
            Self::UncorrelatedPad { pad_seed } => widen_uncorrelated(net, pad_seed),
            Self::EtaDuplicate { eta } => widen_eta(net, eta),
        }
    }

    /// Whether the padded units have zero outgoing weights.
    pub fn pads_are_silent(&self) -> bool {
        !matches!(self, Self::EtaDuplicate { .. })
    }

    pub fn provenance(&self, source_network_id: &str) -> ConstructionProvenance {
        let (eta, pad_seed) = match *self {
            Self::UncorrelatedPad { pad_seed } => (None, Some(pad_seed)),
            Self::EtaDuplicate { eta } => (Some(eta), None),
            _ => (None, None),
        };
        ConstructionProvenance {
            recipe: self.label().to_string(),
            source_network_id: source_network_id.to_string(),
            eta,
            pad_seed,
            detail: None,
        }
    }
}

fn last_hidden(net: &Mlp) -> Result<usize> {
    if net.num_hidden() == 0 {
        return Err(Error::invalid("network has no hidden layer to widen"));
    }
    Ok(net.num_hidden() - 1)
}

/// Appends `pad` units to the last hidden layer. `pad_rows` gives their
/// incoming weights and biases; `output` maps each original output weight
/// `w` to the pair (weight onto the original unit, weight onto its pad).
fn widen_last(
    net: &Mlp,
    pad_rows: Vec<(Vec<f64>, f64)>,
    output: impl Fn(usize, f64) -> (f64, f64),
) -> Result<Mlp> {
    let h = last_hidden(net)?;
    let mut layers = net.layers().to_vec();
    let hidden = &layers[h];
    let width = hidden.out_dim();
    assert_eq!(pad_rows.len(), width, "widening doubles the layer");

    let mut rows: Vec<Vec<f64>> = (0..width).map(|r| hidden.weights.row(r).to_vec()).collect();
    let mut biases = hidden.biases.clone();
    for (w, b) in pad_rows {
        rows.push(w);
        biases.push(b);
    }
    layers[h] = LayerParams::new(DenseMatrix::from_rows(&rows)?, biases)?;

    let out = &layers[h + 1];
    let out_rows: Vec<Vec<f64>> = (0..out.out_dim())
        .map(|c| {
            let (orig, pad): (Vec<f64>, Vec<f64>) = out.weights.row(c).iter().map(|&w| output(c, w)).unzip();
            orig.into_iter().chain(pad).collect()
        })
        .collect();
    layers[h + 1] = LayerParams::new(DenseMatrix::from_rows(&out_rows)?, out.biases.clone())?;
    Mlp::new(layers)
}

fn copies_of_last(net: &Mlp) -> Result<Vec<(Vec<f64>, f64)>> {
    let layer = &net.layers()[last_hidden(net)?];
    Ok((0..layer.out_dim())
        .map(|r| (layer.weights.row(r).to_vec(), layer.biases[r]))
        .collect())
}

/// Last hidden layer becomes `[u, u]`; the copies have zero output weights.
pub fn widen_duplicate_zero(net: &Mlp) -> Result<Mlp> {
    widen_last(net, copies_of_last(net)?, |_, w| (w, 0.0))
}

/// Last hidden layer becomes `[u, 0]`: pad units have zero incoming weights,
/// bias −1 and zero output weights.
pub fn widen_dead_units(net: &Mlp) -> Result<Mlp> {
    let layer = &net.layers()[last_hidden(net)?];
    let pads = vec![(vec![0.0; layer.in_dim()], DEAD_UNIT_BIAS); layer.out_dim()];
    widen_last(net, pads, |_, w| (w, 0.0))
}

/// Last hidden layer becomes `[u, v]` where `v` has fresh N(0, 0.5²) incoming
/// weights drawn from `pad_seed`, zero biases and zero output weights.
pub fn widen_uncorrelated(net: &Mlp, pad_seed: u64) -> Result<Mlp> {
    let layer = &net.layers()[last_hidden(net)?];
    let mut rng = SeededRng::new(pad_seed);
    let pads = (0..layer.out_dim())
        .map(|_| {
            let w = (0..layer.in_dim())
                .map(|_| rng.normal(0.0, UNCORRELATED_PAD_SIGMA))
                .collect();
            (w, 0.0)
        })
        .collect();
    widen_last(net, pads, |_, w| (w, 0.0))
}

/// Last hidden layer becomes `[u, u]`; onto output `c` the two copies get
/// weights `w/2 + s_c·η` and `w/2 − s_c·η`, with `s_c = +1` for even `c` and
/// `−1` for odd `c`.
///
/// Logits are preserved up to rounding. Ablating copy `k` of the first half
/// shifts logit `c` by `(−s_c·η − w_ck/2)·u_k`; ablating copy `k` of the
/// second half shifts it by `(s_c·η − w_ck/2)·u_k`. A shift shared by every
/// logit cannot change an argmax label, hence the alternating sign.
pub fn widen_eta(net: &Mlp, eta: f64) -> Result<Mlp> {
    if !eta.is_finite() || eta.abs() > ETA_CAP {
        return Err(Error::invalid(format!("eta must be finite with |eta| <= {ETA_CAP:e}, got {eta}")));
    }
    widen_last(net, copies_of_last(net)?, |c, w| {
        let e = eta_sign(c) * eta;
        (w / 2.0 + e, w / 2.0 - e)
    })
}

/// Sign `s_c` applied to η on output `c` by [`widen_eta`].
pub fn eta_sign(output: usize) -> f64 {
    if output.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Adds a unit to hidden layer `layer` whose activation is `gamma` times
/// unit `unit`'s (incoming weights and bias scaled by `gamma > 0`), with the
/// given outgoing weights. Returns the network and the new unit's index.
pub fn duplicate_unit(net: &Mlp, layer: usize, unit: usize, gamma: f64, outgoing: &[f64]) -> Result<(Mlp, usize)> {
    if layer >= net.num_hidden() {
        return Err(Error::invalid(format!("hidden layer {layer} out of range")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma must be positive and finite"));
    }
    let mut layers = net.layers().to_vec();
    let width = layers[layer].out_dim();
    if unit >= width {
        return Err(Error::invalid(format!("unit {unit} out of range for width {width}")));
    }
    if outgoing.len() != layers[layer + 1].out_dim() {
        return Err(Error::DimensionMismatch {
            expected: layers[layer + 1].out_dim(),
            actual: outgoing.len(),
        });
    }
    let src = &layers[layer];
    let mut rows: Vec<Vec<f64>> = (0..width).map(|r| src.weights.row(r).to_vec()).collect();
    rows.push(src.weights.row(unit).iter().map(|w| gamma * w).collect());
    let mut biases = src.biases.clone();
    biases.push(gamma * src.biases[unit]);
    layers[layer] = LayerParams::new(DenseMatrix::from_rows(&rows)?, biases)?;

    let next = &layers[layer + 1];
    let next_rows: Vec<Vec<f64>> = (0..next.out_dim())
        .map(|c| {
            let mut r = next.weights.row(c).to_vec();
            r.push(outgoing[c]);
            r
        })
        .collect();
    layers[layer + 1] = LayerParams::new(DenseMatrix::from_rows(&next_rows)?, next.biases.clone())?;
    Ok((Mlp::new(layers)?, width))
}

/// Largest `|u_j − γ·u_i|` over `inputs`, relative to the largest magnitude
/// of either side; 0 when both activations are identically zero.
pub fn merge_deviation(net: &Mlp, inputs: &DenseMatrix, layer: usize, keep: usize, remove: usize, gamma: f64) -> Result<f64> {
    let acts = net.hidden_activations(inputs, layer)?;
    if keep >= acts.cols() || remove >= acts.cols() {
        return Err(Error::invalid("merge unit index out of range"));
    }
    let (mut dev, mut scale) = (0.0f64, 0.0f64);
    for r in 0..acts.rows() {
        let ui = gamma * acts.get(r, keep);
        let uj = acts.get(r, remove);
        dev = dev.max((uj - ui).abs());
        scale = scale.max(ui.abs()).max(uj.abs());
    }
    Ok(if scale == 0.0 { 0.0 } else { dev / scale })
}

/// Removes unit `remove` from hidden layer `layer` after checking on
/// `verification` that `u_remove = γ·u_keep`; the next layer's weights onto
/// `keep` become `w_keep + γ·w_remove`.
pub fn merge_repeated(
    net: &Mlp,
    verification: &DenseMatrix,
    layer: usize,
    keep: usize,
    remove: usize,
    gamma: f64,
) -> Result<Mlp> {
    if layer >= net.num_hidden() {
        return Err(Error::invalid(format!("hidden layer {layer} out of range")));
    }
    if keep == remove {
        return Err(Error::invalid("cannot merge a unit with itself"));
    }
    if !gamma.is_finite() {
        return Err(Error::NonFinite("merge gamma"));
    }
    if net.layers()[layer].out_dim() < 2 {
        return Err(Error::invalid("cannot merge in a single-unit layer"));
    }
    let max_deviation = merge_deviation(net, verification, layer, keep, remove, gamma)?;
    if max_deviation > MERGE_TOLERANCE {
        return Err(Error::MergeRefused {
            max_deviation,
            tolerance: MERGE_TOLERANCE,
        });
    }

    let mut layers = net.layers().to_vec();
    let src = &layers[layer];
    let kept: Vec<usize> = (0..src.out_dim()).filter(|&u| u != remove).collect();
    let biases = kept.iter().map(|&u| src.biases[u]).collect();
    layers[layer] = LayerParams::new(src.weights.select_rows(&kept), biases)?;

    let next = &layers[layer + 1];
    let rows: Vec<Vec<f64>> = (0..next.out_dim())
        .map(|c| {
            let w = next.weights.row(c);
            kept.iter()
                .map(|&u| if u == keep { w[keep] + gamma * w[remove] } else { w[u] })
                .collect()
        })
        .collect();
    layers[layer + 1] = LayerParams::new(DenseMatrix::from_rows(&rows)?, next.biases.clone())?;
    Mlp::new(layers)
}

/// Per-row `‖a − b‖∞ / ‖a‖∞`, maximised over rows (absolute when `‖a‖∞ = 0`).
pub fn max_relative_logit_error(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return Err(Error::DimensionMismatch {
            expected: a.rows() * a.cols(),
            actual: b.rows() * b.cols(),
        });
    }
    let mut worst = 0.0f64;
    for r in 0..a.rows() {
        let diff = a.row(r).iter().zip(b.row(r)).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let norm = a.row(r).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        worst = worst.max(if norm == 0.0 { diff } else { diff / norm });
    }
    Ok(worst)
}
