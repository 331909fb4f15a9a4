//! Pairwise activation correlation within a layer.
//!
//! Similarity is the mean, over non-dead sampled units, of the number of
//! partners whose absolute Pearson correlation exceeds a threshold. Units with
//! constant activation are "dead": their coefficients are undefined, so they
//! are excluded from the multiset and counted separately.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mlp::Mlp;
use crate::numerics::{is_constant, mean, sample_std, sample_without_replacement, DenseMatrix, SeededRng};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_UNIT_CAP: usize = 50_000;
pub const DEFAULT_SAMPLINGS: usize = 3;
pub const HISTOGRAM_BINS: usize = 50;

/// Post-ReLU activations of one hidden layer over an evaluation set.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationMatrix {
    pub layer: usize,
    /// Rows are examples, columns are units.
    pub matrix: DenseMatrix,
    /// Set when the columns are a subset of the layer's units.
    pub sampled_unit_indices: Option<Vec<usize>>,
}

impl ActivationMatrix {
    pub fn new(layer: usize, matrix: DenseMatrix) -> Self {
        Self {
            layer,
            matrix,
            sampled_unit_indices: None,
        }
    }

    pub fn units(&self) -> usize {
        self.matrix.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSummary {
    /// `|r|` for every pair of sampled non-dead units, in `(i, j)` order with
    /// `i < j` over the sampled column order.
    pub coefficients: Vec<f64>,
    pub sampled_units: Vec<usize>,
    pub dead_unit_count: usize,
    pub threshold: f64,
    pub pairs_above: usize,
    pub similarity: f64,
    pub histogram: [u64; HISTOGRAM_BINS],
}

pub fn harvest_activations(net: &Mlp, inputs: &DenseMatrix, layer: usize) -> Result<ActivationMatrix> {
    Ok(ActivationMatrix::new(layer, net.hidden_activations(inputs, layer)?))
}

/// Bin of `|r|` among 50 equal bins over `[0, 1]`; 1.0 falls in the last bin.
pub fn histogram_bin(r: f64) -> usize {
    ((r * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
}

/// Column centred on its mean, with its sum of squares; `None` if dead.
///
/// Summation order matches [`crate::numerics::pearson_abs`], so coefficients
/// built from these pieces are bit-identical to calling it pairwise.
fn centred(column: &[f64]) -> Option<(Vec<f64>, f64)> {
    if is_constant(column) {
        return None;
    }
    let m = column.iter().sum::<f64>() / column.len() as f64;
    let d: Vec<f64> = column.iter().map(|x| x - m).collect();
    let ss = d.iter().fold(0.0, |acc, x| acc + x * x);
    (ss != 0.0).then_some((d, ss))
}

pub fn correlation_summary(
    acts: &ActivationMatrix,
    threshold: f64,
    cap: usize,
    rng: &mut SeededRng,
) -> Result<CorrelationSummary> {
    let units = acts.units();
    if units < 2 {
        return Err(Error::invalid("correlation needs at least 2 units"));
    }
    if acts.matrix.rows() < 2 {
        return Err(Error::invalid("correlation needs at least 2 examples"));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    if cap < 2 {
        return Err(Error::invalid("unit cap must be at least 2"));
    }
    let picked = sample_without_replacement(units, cap.min(units), rng)?;
    let sampled_units: Vec<usize> = match &acts.sampled_unit_indices {
        Some(ids) => picked.iter().map(|&j| ids[j]).collect(),
        None => picked.clone(),
    };

    let columns: Vec<Option<(Vec<f64>, f64)>> =
        picked.par_iter().map(|&j| centred(&acts.matrix.column(j))).collect();
    let dead_unit_count = columns.iter().filter(|c| c.is_none()).count();
    let live: Vec<&(Vec<f64>, f64)> = columns.iter().flatten().collect();

    let coefficients: Vec<f64> = (0..live.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let (di, si) = live[i];
            live[i + 1..].iter().map(move |(dj, sj)| {
                let sab = di.iter().zip(dj).fold(0.0, |acc, (x, y)| acc + x * y);
                (sab / (si * sj).sqrt()).abs().min(1.0)
            })
        })
        .collect();

    let pairs_above = coefficients.iter().filter(|&&r| r > threshold).count();
    let mut histogram = [0u64; HISTOGRAM_BINS];
    for &r in &coefficients {
        histogram[histogram_bin(r)] += 1;
    }
    let similarity = if live.is_empty() {
        0.0
    } else {
        2.0 * pairs_above as f64 / live.len() as f64
    };
    Ok(CorrelationSummary {
        coefficients,
        sampled_units,
        dead_unit_count,
        threshold,
        pairs_above,
        similarity,
        histogram,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerRepetition {
    pub layer: usize,
    /// One summary per independent unit sampling.
    pub summaries: Vec<CorrelationSummary>,
    pub similarity_mean: f64,
    pub similarity_std: f64,
    pub dead_units_mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepetitionReport {
    pub layers: Vec<LayerRepetition>,
    /// Mean over layers of the per-layer sampling means.
    pub mean_similarity: f64,
    /// Mean over layers of the per-layer sampling standard deviations.
    pub mean_similarity_std: f64,
    /// Sum over layers of the mean dead-unit count.
    pub dead_units: f64,
    pub seed: u64,
}

/// Sampling `s` of layer `l` draws its units from
/// `rng.child("sampling/layer{l}", s)`.
pub fn layerwise_repetition_report(
    net: &Mlp,
    inputs: &DenseMatrix,
    threshold: f64,
    cap: usize,
    samplings: usize,
    rng: &SeededRng,
) -> Result<RepetitionReport> {
    if net.num_hidden() == 0 {
        return Err(Error::invalid("network has no hidden layers"));
    }
    if samplings == 0 {
        return Err(Error::invalid("samplings must be at least 1"));
    }
    let mut layers = Vec::with_capacity(net.num_hidden());
    for layer in 0..net.num_hidden() {
        let acts = harvest_activations(net, inputs, layer)?;
        let sampling = |s: usize| {
            let mut r = rng.child(&format!("sampling/layer{layer}"), s as u64);
            correlation_summary(&acts, threshold, cap, &mut r)
        };
        // With the cap at or above the width every sampling is the whole layer.
        let summaries = if cap >= acts.units() {
            vec![sampling(0)?; samplings]
        } else {
            (0..samplings).map(sampling).collect::<Result<Vec<_>>>()?
        };
        let sims: Vec<f64> = summaries.iter().map(|s| s.similarity).collect();
        let dead: Vec<f64> = summaries.iter().map(|s| s.dead_unit_count as f64).collect();
        layers.push(LayerRepetition {
            layer,
            similarity_mean: mean(&sims),
            similarity_std: sample_std(&sims),
            dead_units_mean: mean(&dead),
            summaries,
        });
    }
    let means: Vec<f64> = layers.iter().map(|l| l.similarity_mean).collect();
    let stds: Vec<f64> = layers.iter().map(|l| l.similarity_std).collect();
    Ok(RepetitionReport {
        mean_similarity: mean(&means),
        mean_similarity_std: mean(&stds),
        dead_units: layers.iter().map(|l| l.dead_units_mean).sum(),
        layers,
        seed: rng.base_seed(),
    })
}

/// Column names of [`summary_records`]: layer, sampling, similarity, dead
/// units, then the 50 histogram bins.
pub fn summary_columns() -> Vec<String> {
    let mut cols: Vec<String> = ["layer", "sampling_id", "similarity", "dead_units"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((0..HISTOGRAM_BINS).map(|b| format!("bin_{b:02}")));
    cols
}

/// One record per (layer, sampling).
pub fn summary_records(report: &RepetitionReport) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for layer in &report.layers {
        for (s, summary) in layer.summaries.iter().enumerate() {
            let mut rec = vec![
                layer.layer.to_string(),
                s.to_string(),
                summary.similarity.to_string(),
                summary.dead_unit_count.to_string(),
            ];
            rec.extend(summary.histogram.iter().map(u64::to_string));
            out.push(rec);
        }
    }
    out
}

pub fn write_csv<W: std::io::Write>(out: W, network_id: &str, report: &RepetitionReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once("network_id".to_string()).chain(summary_columns()))?;
    for rec in summary_records(report) {
        w.write_record(std::iter::once(network_id.to_string()).chain(rec))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{build_mlp, InitSpec};
    use crate::numerics::pearson_abs;

    fn acts(columns: &[Vec<f64>]) -> ActivationMatrix {
        ActivationMatrix::new(0, DenseMatrix::from_columns(columns).unwrap())
    }

    fn noise(seed: u64, rows: usize, cols: usize) -> Vec<Vec<f64>> {
        let mut rng = SeededRng::new(seed);
        (0..cols).map(|_| (0..rows).map(|_| rng.standard_normal()).collect()).collect()
    }

    #[test]
    fn identical_columns() {
        let base: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let s = correlation_summary(&acts(&vec![base; 5]), 0.5, 100, &mut SeededRng::new(1)).unwrap();
        assert_eq!(s.similarity, 4.0);
        assert_eq!(s.coefficients.len(), 10);
        assert_eq!(s.histogram[HISTOGRAM_BINS - 1], 10);
    }

    #[test]
    fn affine_pair() {
        let a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).cos()).collect();
        let b: Vec<f64> = a.iter().map(|x| 3.0 * x + 1.0).collect();
        let s = correlation_summary(&acts(&[a, b]), 0.5, 100, &mut SeededRng::new(1)).unwrap();
        assert_eq!(s.coefficients.len(), 1);
        assert!((s.coefficients[0] - 1.0).abs() < 1e-12);
        assert_eq!(s.similarity, 1.0);
    }

    #[test]
    fn independent_noise_is_dissimilar() {
        let s = correlation_summary(&acts(&noise(4, 1000, 64)), 0.5, 1000, &mut SeededRng::new(1)).unwrap();
        assert!(s.similarity < 0.05, "{}", s.similarity);
    }

    #[test]
    fn dead_units_are_counted() {
        let mut cols = noise(5, 50, 4);
        cols.push(vec![0.0; 50]);
        cols.push(vec![2.5; 50]);
        let s = correlation_summary(&acts(&cols), 0.5, 100, &mut SeededRng::new(1)).unwrap();
        assert_eq!(s.dead_unit_count, 2);
        assert_eq!(s.coefficients.len(), 6);

        let all_dead = correlation_summary(&acts(&[vec![0.0; 5], vec![0.0; 5]]), 0.5, 10, &mut SeededRng::new(1)).unwrap();
        assert_eq!(all_dead.similarity, 0.0);
        assert_eq!(all_dead.dead_unit_count, 2);
    }

    #[test]
    fn preconditions() {
        let one = acts(&noise(1, 10, 1));
        assert!(correlation_summary(&one, 0.5, 10, &mut SeededRng::new(1)).is_err());
        let two = acts(&noise(1, 10, 2));
        assert!(correlation_summary(&two, 0.0, 10, &mut SeededRng::new(1)).is_err());
        assert!(correlation_summary(&two, 1.0, 10, &mut SeededRng::new(1)).is_err());
    }

    #[test]
    fn coefficients_match_pairwise_pearson_bitwise() {
        let cols = noise(6, 40, 7);
        let s = correlation_summary(&acts(&cols), 0.5, 100, &mut SeededRng::new(1)).unwrap();
        let mut expected = Vec::new();
        for i in 0..7 {
            for j in i + 1..7 {
                expected.push(pearson_abs(&cols[i], &cols[j]).unwrap().unwrap());
            }
        }
        assert_eq!(s.coefficients, expected);
    }

    #[test]
    fn capped_sampling() {
        let a = acts(&noise(7, 30, 12));
        let s = correlation_summary(&a, 0.5, 5, &mut SeededRng::new(3)).unwrap();
        assert_eq!(s.sampled_units.len(), 5);
        assert_eq!(s.coefficients.len(), 10);
    }

    #[test]
    fn report_layers_and_samplings() {
        let net = build_mlp(4, &[12, 8], 2, &InitSpec::fixed_sigma(1.0), &mut SeededRng::new(2)).unwrap();
        let mut rng = SeededRng::new(3);
        let x = DenseMatrix::new(60, 4, (0..240).map(|_| rng.standard_normal()).collect()).unwrap();
        let full = layerwise_repetition_report(&net, &x, 0.5, 100, 3, &SeededRng::new(1)).unwrap();
        assert!(full.layers.iter().all(|l| l.similarity_std == 0.0));
        assert_eq!(
            full.mean_similarity,
            (full.layers[0].similarity_mean + full.layers[1].similarity_mean) / 2.0
        );
        let capped = layerwise_repetition_report(&net, &x, 0.5, 4, 3, &SeededRng::new(1)).unwrap();
        assert_eq!(capped, layerwise_repetition_report(&net, &x, 0.5, 4, 3, &SeededRng::new(1)).unwrap());
    }
}
