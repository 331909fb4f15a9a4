//! Fully connected ReLU networks with raw-logit heads.
//!
//! Weights of a layer are stored `out_dim × in_dim`, so a unit's incoming
//! weights are one contiguous row and its outgoing weights are one column of
//! the next layer. Every forward path (single row, batch, continuation from a
//! cached hidden layer) runs the same per-layer arithmetic, which keeps
//! masked and unmasked evaluations comparable bit for bit.

mod file;
mod init;

pub use file::{
    deserialize, read_model, serialize, write_model, ConstructionProvenance, ModelMeta,
    MODEL_FORMAT_VERSION,
};
pub use init::{init_variance, InitDistribution, InitFamily, InitSpec};

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::numerics::{gemm_nt, DenseMatrix, SeededRng};

/// Parameters of one dense layer: `weights` is `out_dim × in_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weights: DenseMatrix,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn new(weights: DenseMatrix, biases: Vec<f64>) -> Result<Self> {
        if biases.len() != weights.rows() {
            return Err(Error::DimensionMismatch {
                expected: weights.rows(),
                actual: biases.len(),
            });
        }
        if biases.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("LayerParams::new"));
        }
        Ok(Self { weights, biases })
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weights: DenseMatrix::zeros(out_dim, in_dim),
            biases: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    /// `input · Wᵀ + b`
    fn affine(&self, input: &DenseMatrix) -> DenseMatrix {
        let mut z = DenseMatrix::zeros(input.rows(), self.out_dim());
        gemm_nt(input, &self.weights, &mut z, 0.0);
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.biases) {
                *v += b;
            }
        }
        z
    }
}

/// Layered ReLU network. The last layer emits logits; all others are hidden.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<LayerParams>,
}

impl Mlp {
    pub fn new(layers: Vec<LayerParams>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].out_dim(),
                    actual: pair[1].in_dim(),
                });
            }
        }
        if layers.iter().any(|l| l.in_dim() == 0 || l.out_dim() == 0) {
            return Err(Error::invalid("layer dimensions must be at least 1"));
        }
        let net = Self { layers };
        if !net.is_finite() {
            return Err(Error::NonFinite("Mlp::new"));
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_hidden(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.num_hidden()].iter().map(LayerParams::out_dim).collect()
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn into_layers(self) -> Vec<LayerParams> {
        self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.biases.len())
            .sum()
    }

    /// All parameters, layer by layer: weights row-major, then biases.
    pub fn flat_parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.biases.iter().all(|b| b.is_finite()))
    }

    fn check_hidden(&self, layer: usize) -> Result<()> {
        if layer >= self.num_hidden() {
            return Err(Error::invalid(format!(
                "hidden layer {layer} out of range (network has {})",
                self.num_hidden()
            )));
        }
        Ok(())
    }

    fn check_inputs(&self, inputs: &DenseMatrix) -> Result<()> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: inputs.cols(),
            });
        }
        Ok(())
    }

    /// Run layers `from..` starting at `input`, which is the (unmasked)
    /// output of layer `from - 1` (or the network input when `from == 0`).
    fn run_from(&self, mut input: Cow<'_, DenseMatrix>, from: usize, mask: Option<&AblationMask>) -> Result<DenseMatrix> {
        if from > 0 {
            if let Some(m) = mask {
                m.apply(from - 1, input.to_mut());
            }
        }
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate().skip(from) {
            let mut z = layer.affine(&input);
            if idx < last {
                relu_in_place(&mut z);
                if let Some(m) = mask {
                    m.apply(idx, &mut z);
                }
            }
            input = Cow::Owned(z);
        }
        let out = input.into_owned();
        if !out.is_finite() {
            return Err(Error::NonFinite("forward"));
        }
        Ok(out)
    }

    /// Logits for every row of `inputs`.
    pub fn forward_batch(&self, inputs: &DenseMatrix, mask: Option<&AblationMask>) -> Result<DenseMatrix> {
        self.check_inputs(inputs)?;
        if let Some(m) = mask {
            m.validate(self)?;
        }
        self.run_from(Cow::Borrowed(inputs), 0, mask)
    }

    /// Logits for a single input vector.
    pub fn forward(&self, x: &[f64], mask: Option<&AblationMask>) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let row = DenseMatrix::new(1, x.len(), x.to_vec())?;
        Ok(self.forward_batch(&row, mask)?.into_vec())
    }

    /// Unmasked post-ReLU activations of hidden layer `layer` (rows × units).
    pub fn hidden_activations(&self, inputs: &DenseMatrix, layer: usize) -> Result<DenseMatrix> {
        self.check_inputs(inputs)?;
        self.check_hidden(layer)?;
        let mut a: Cow<'_, DenseMatrix> = Cow::Borrowed(inputs);
        for l in &self.layers[..=layer] {
            let mut z = l.affine(&a);
            relu_in_place(&mut z);
            a = Cow::Owned(z);
        }
        Ok(a.into_owned())
    }

    /// Logits given cached unmasked activations of hidden layer `layer`.
    /// The mask is applied to that layer and every later hidden layer.
    pub fn forward_from_hidden(
        &self,
        activations: &DenseMatrix,
        layer: usize,
        mask: Option<&AblationMask>,
    ) -> Result<DenseMatrix> {
        self.check_hidden(layer)?;
        if activations.cols() != self.layers[layer].out_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.layers[layer].out_dim(),
                actual: activations.cols(),
            });
        }
        if let Some(m) = mask {
            m.validate(self)?;
        }
        self.run_from(Cow::Borrowed(activations), layer + 1, mask)
    }

    pub fn predict_label(&self, x: &[f64], mask: Option<&AblationMask>) -> Result<usize> {
        Ok(argmax(&self.forward(x, mask)?))
    }

    pub fn predict_labels(&self, inputs: &DenseMatrix, mask: Option<&AblationMask>) -> Result<Vec<usize>> {
        let logits = self.forward_batch(inputs, mask)?;
        Ok(labels_of(&logits))
    }
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn labels_of(logits: &DenseMatrix) -> Vec<usize> {
    (0..logits.rows()).map(|r| argmax(logits.row(r))).collect()
}

fn relu_in_place(z: &mut DenseMatrix) {
    for v in z.as_mut_slice() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Builds a network with i.i.d. weights drawn per `spec` and zero biases.
/// Draw order is layer by layer, row-major.
pub fn build_mlp(
    input_dim: usize,
    hidden_widths: &[usize],
    output_dim: usize,
    spec: &InitSpec,
    rng: &mut SeededRng,
) -> Result<Mlp> {
    spec.validate()?;
    let mut dims = Vec::with_capacity(hidden_widths.len() + 2);
    dims.push(input_dim);
    dims.extend_from_slice(hidden_widths);
    dims.push(output_dim);
    if dims.contains(&0) {
        return Err(Error::invalid("all layer widths must be at least 1"));
    }
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for pair in dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let std = init_variance(spec, fan_in, fan_out)?.sqrt();
        let data: Vec<f64> = match spec.distribution {
            InitDistribution::Normal => (0..fan_in * fan_out).map(|_| rng.normal(0.0, std)).collect(),
            InitDistribution::Uniform => {
                let half_width = 3.0f64.sqrt() * std;
                (0..fan_in * fan_out).map(|_| rng.symmetric_uniform(half_width)).collect()
            }
        };
        layers.push(LayerParams::new(DenseMatrix::new(fan_out, fan_in, data)?, vec![0.0; fan_out])?);
    }
    Mlp::new(layers)
}

/// Units whose post-activation output is forced to zero, per hidden layer.
/// The output layer has no entry and cannot be masked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AblationMask {
    layers: Vec<Vec<bool>>,
}

impl AblationMask {
    /// All-false mask shaped for `net`.
    pub fn none(net: &Mlp) -> Self {
        Self {
            layers: net.hidden_widths().into_iter().map(|w| vec![false; w]).collect(),
        }
    }

    pub fn from_layers(layers: Vec<Vec<bool>>) -> Self {
        Self { layers }
    }

    /// Mask ablating `units` of hidden layer `layer` only.
    pub fn for_units(net: &Mlp, layer: usize, units: &[usize]) -> Result<Self> {
        net.check_hidden(layer)?;
        let mut mask = Self::none(net);
        for &u in units {
            mask.ablate(layer, u)?;
        }
        Ok(mask)
    }

    pub fn ablate(&mut self, layer: usize, unit: usize) -> Result<()> {
        let slot = self
            .layers
            .get_mut(layer)
            .and_then(|l| l.get_mut(unit))
            .ok_or_else(|| Error::invalid(format!("unit {unit} of layer {layer} out of range")))?;
        *slot = true;
        Ok(())
    }

    pub fn is_ablated(&self, layer: usize, unit: usize) -> bool {
        self.layers.get(layer).and_then(|l| l.get(unit)).copied().unwrap_or(false)
    }

    pub fn ablated_count(&self) -> usize {
        self.layers.iter().flatten().filter(|&&b| b).count()
    }

    /// Union of two masks of the same shape.
    pub fn union(&self, other: &AblationMask) -> AblationMask {
        let layers = self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x || y).collect())
            .collect();
        AblationMask { layers }
    }

    pub fn validate(&self, net: &Mlp) -> Result<()> {
        let widths = net.hidden_widths();
        if self.layers.len() != widths.len() {
            return Err(Error::DimensionMismatch {
                expected: widths.len(),
                actual: self.layers.len(),
            });
        }
        for (mask, &w) in self.layers.iter().zip(&widths) {
            if mask.len() != w {
                return Err(Error::DimensionMismatch {
                    expected: w,
                    actual: mask.len(),
                });
            }
        }
        Ok(())
    }

    fn apply(&self, layer: usize, activations: &mut DenseMatrix) {
        let Some(flags) = self.layers.get(layer) else {
            return;
        };
        let cols: Vec<usize> = flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect();
        if cols.is_empty() {
            return;
        }
        for r in 0..activations.rows() {
            let row = activations.row_mut(r);
            for &c in &cols {
                row[c] = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> Mlp {
        let hidden = LayerParams::new(DenseMatrix::new(1, 2, vec![1.0, -1.0]).unwrap(), vec![0.0]).unwrap();
        let out = LayerParams::new(DenseMatrix::new(2, 1, vec![1.0, -1.0]).unwrap(), vec![0.0, 0.0]).unwrap();
        Mlp::new(vec![hidden, out]).unwrap()
    }

    fn random_net(seed: u64, input: usize, hidden: &[usize], out: usize) -> Mlp {
        build_mlp(input, hidden, out, &InitSpec::fixed_sigma(0.7), &mut SeededRng::new(seed)).unwrap()
    }

    fn random_inputs(seed: u64, rows: usize, cols: usize) -> DenseMatrix {
        let mut rng = SeededRng::new(seed);
        DenseMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.standard_normal()).collect()).unwrap()
    }

    #[test]
    fn hand_arithmetic_hidden_activation() {
        let net = tiny();
        let x = DenseMatrix::new(1, 2, vec![2.0, 1.0]).unwrap();
        assert_eq!(net.hidden_activations(&x, 0).unwrap().as_slice(), &[1.0]);
        let mask = AblationMask::for_units(&net, 0, &[0]).unwrap();
        assert_eq!(net.forward(&[2.0, 1.0], None).unwrap(), vec![1.0, -1.0]);
        assert_eq!(net.forward(&[2.0, 1.0], Some(&mask)).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn argmax_tie_break() {
        assert_eq!(argmax(&[0.2, 0.9]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn dimension_errors() {
        let net = tiny();
        assert!(net.forward(&[1.0], None).is_err());
        assert!(AblationMask::for_units(&net, 1, &[0]).is_err());
        assert!(AblationMask::for_units(&net, 0, &[3]).is_err());
        let bad = AblationMask::from_layers(vec![vec![false, false]]);
        assert!(net.forward(&[1.0, 1.0], Some(&bad)).is_err());
        let l1 = LayerParams::zeros(3, 2);
        let l2 = LayerParams::zeros(1, 4);
        assert!(Mlp::new(vec![l1, l2]).is_err());
    }

    #[test]
    fn build_is_deterministic_and_sized() {
        let spec = InitSpec::fixed_sigma(0.01);
        let a = build_mlp(10, &[128], 2, &spec, &mut SeededRng::new(5)).unwrap();
        let b = build_mlp(10, &[128], 2, &spec, &mut SeededRng::new(5)).unwrap();
        assert_eq!(a.flat_parameters(), b.flat_parameters());
        assert_eq!(a.hidden_widths(), vec![128]);
        assert_eq!((a.input_dim(), a.output_dim()), (10, 2));
        assert!(a.layers().iter().all(|l| l.biases.iter().all(|&b| b == 0.0)));
        assert!(build_mlp(10, &[0], 2, &spec, &mut SeededRng::new(5)).is_err());
    }

    #[test]
    fn fixed_sigma_empirical_std() {
        let net = build_mlp(10, &[128], 2, &InitSpec::fixed_sigma(0.01), &mut SeededRng::new(11)).unwrap();
        let w = net.layers()[0].weights.as_slice();
        assert!(w.len() >= 1000);
        let std = crate::numerics::sample_std(w);
        assert!((std - 0.01).abs() < 0.001, "std {std}");
    }

    #[test]
    fn glorot_and_uniform_variances() {
        for dist in [InitDistribution::Normal, InitDistribution::Uniform] {
            let spec = InitSpec::new(InitFamily::Glorot, dist);
            let net = build_mlp(10, &[32], 2, &spec, &mut SeededRng::new(12)).unwrap();
            let w = net.layers()[0].weights.as_slice();
            let var = crate::numerics::sample_std(w).powi(2);
            let want = 2.0 / 42.0;
            assert!((var - want).abs() < 0.15 * want, "{dist:?}: var {var} vs {want}");
        }
        let spec = InitSpec::new(InitFamily::He, InitDistribution::Uniform);
        let net = build_mlp(50, &[400], 2, &spec, &mut SeededRng::new(1)).unwrap();
        let bound = (3.0f64 * 2.0 / 50.0).sqrt();
        assert!(net.layers()[0].weights.as_slice().iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn zero_outgoing_padding_keeps_logits() {
        // Pad the hidden layer with units whose outgoing weights are zero,
        // mask them, and compare against the unpadded network.
        let net = random_net(3, 10, &[128], 2);
        let mut rng = SeededRng::new(4);
        let pad = 16;
        let hidden = &net.layers()[0];
        let out = &net.layers()[1];
        let mut w1 = hidden.weights.as_slice().to_vec();
        w1.extend((0..pad * 10).map(|_| rng.standard_normal()));
        let mut b1 = hidden.biases.clone();
        b1.extend(std::iter::repeat_n(0.0, pad));
        let mut w2 = DenseMatrix::zeros(2, 128 + pad);
        for r in 0..2 {
            w2.row_mut(r)[..128].copy_from_slice(out.weights.row(r));
        }
        let padded = Mlp::new(vec![
            LayerParams::new(DenseMatrix::new(128 + pad, 10, w1).unwrap(), b1).unwrap(),
            LayerParams::new(w2, out.biases.clone()).unwrap(),
        ])
        .unwrap();
        let units: Vec<usize> = (128..128 + pad).collect();
        let mask = AblationMask::for_units(&padded, 0, &units).unwrap();
        let x: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(net.forward(&x, None).unwrap(), padded.forward(&x, None).unwrap());
        assert_eq!(net.forward(&x, None).unwrap(), padded.forward(&x, Some(&mask)).unwrap());
    }

    #[test]
    fn single_row_matches_batch_rows() {
        for (seed, hidden) in [(1u64, vec![5usize]), (2, vec![128]), (3, vec![300, 7]), (4, vec![512])] {
            let net = random_net(seed, 10, &hidden, 2);
            let x = random_inputs(seed + 100, 37, 10);
            let batch = net.forward_batch(&x, None).unwrap();
            for r in 0..x.rows() {
                assert_eq!(net.forward(x.row(r), None).unwrap(), batch.row(r));
            }
        }
    }

    #[test]
    fn continuation_matches_full_forward() {
        let net = random_net(8, 6, &[20, 9], 3);
        let x = random_inputs(9, 25, 6);
        let mut mask = AblationMask::none(&net);
        mask.ablate(0, 3).unwrap();
        mask.ablate(1, 2).unwrap();
        let full = net.forward_batch(&x, Some(&mask)).unwrap();
        let h0 = net.hidden_activations(&x, 0).unwrap();
        assert_eq!(net.forward_from_hidden(&h0, 0, Some(&mask)).unwrap(), full);
    }

    proptest! {
        #[test]
        fn mask_properties(seed in any::<u64>(), units in prop::collection::vec(0usize..12, 0..12)) {
            let net = random_net(seed, 4, &[12], 2);
            let x = random_inputs(seed ^ 1, 8, 4);
            let none = net.forward_batch(&x, None).unwrap();
            let empty = net.forward_batch(&x, Some(&AblationMask::none(&net))).unwrap();
            prop_assert_eq!(&none, &empty);

            let mask = AblationMask::for_units(&net, 0, &units).unwrap();
            let once = net.forward_batch(&x, Some(&mask)).unwrap();
            let twice = net.forward_batch(&x, Some(&mask.union(&mask))).unwrap();
            prop_assert_eq!(once, twice);

            let h = net.hidden_activations(&x, 0).unwrap();
            prop_assert!(h.as_slice().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn labels_invariant_to_positive_logit_scaling(seed in any::<u64>(), scale in 0.01f64..100.0) {
            let net = random_net(seed, 4, &[6], 3);
            let mut scaled = net.clone();
            let last = scaled.layers_mut().last_mut().unwrap();
            for w in last.weights.as_mut_slice() { *w *= scale; }
            for b in &mut last.biases { *b *= scale; }
            let x = random_inputs(seed ^ 2, 16, 4);
            let a = net.forward_batch(&x, None).unwrap();
            let b = scaled.forward_batch(&x, None).unwrap();
            for r in 0..16 {
                let row: Vec<f64> = a.row(r).iter().map(|v| v * scale).collect();
                // Argmax of exactly scaled logits; rounding in `scaled` can only
                // matter at near-ties, which random Gaussian nets avoid.
                prop_assert_eq!(argmax(&row), argmax(a.row(r)));
                prop_assert_eq!(argmax(b.row(r)), argmax(a.row(r)));
            }
        }
    }
}
