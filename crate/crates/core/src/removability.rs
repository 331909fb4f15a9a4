//! Ablation curves: the proportion of test labels left unchanged when a
//! random fraction of one hidden layer's units is zeroed.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mlp::{labels_of, AblationMask, Mlp};
use crate::numerics::{auc_trapezoid, mean, sample_std, sample_without_replacement, Curve, DenseMatrix, SeededRng};

pub const DEFAULT_GRID_POINTS: usize = 20;
pub const DEFAULT_DRAWS_PER_POINT: usize = 5;

/// `{0, 0.05, …, 0.95}`.
pub fn default_grid() -> Vec<f64> {
    (0..DEFAULT_GRID_POINTS).map(|i| i as f64 / DEFAULT_GRID_POINTS as f64).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationCurve {
    /// Hidden layer index; `None` for the layer-averaged curve.
    pub layer: Option<usize>,
    pub grid: Vec<f64>,
    /// Mean unchanged-label proportion over the draws at each grid point.
    pub values: Vec<f64>,
    /// Sample standard deviation over the draws at each grid point.
    pub stds: Vec<f64>,
    pub draws_per_point: usize,
    pub seed: u64,
}

impl AblationCurve {
    pub fn auc(&self) -> Result<f64> {
        Ok(auc_trapezoid(&Curve::new(self.grid.clone(), self.values.clone())?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RemovabilityReport {
    pub curves: Vec<AblationCurve>,
    pub layer_aucs: Vec<f64>,
    /// Arithmetic mean of `layer_aucs`.
    pub mean_auc: f64,
    pub seed: u64,
}

impl RemovabilityReport {
    /// Pointwise mean of the per-layer curves.
    pub fn averaged_curve(&self) -> AblationCurve {
        let first = &self.curves[0];
        let points = first.grid.len();
        let values = (0..points)
            .map(|i| mean(&self.curves.iter().map(|c| c.values[i]).collect::<Vec<_>>()))
            .collect();
        let stds = (0..points)
            .map(|i| mean(&self.curves.iter().map(|c| c.stds[i]).collect::<Vec<_>>()))
            .collect();
        AblationCurve {
            layer: None,
            grid: first.grid.clone(),
            values,
            stds,
            draws_per_point: first.draws_per_point,
            seed: self.seed,
        }
    }
}

/// Unmasked labels of every row.
pub fn baseline_labels(net: &Mlp, inputs: &DenseMatrix) -> Result<Vec<usize>> {
    if inputs.rows() == 0 {
        return Err(Error::invalid("empty test set"));
    }
    net.predict_labels(inputs, None)
}

fn fraction_equal(a: &[usize], b: &[usize]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

/// Fraction of rows whose label under `mask` equals `baseline`.
pub fn unchanged_proportion(net: &Mlp, inputs: &DenseMatrix, baseline: &[usize], mask: &AblationMask) -> Result<f64> {
    if baseline.len() != inputs.rows() {
        return Err(Error::DimensionMismatch {
            expected: inputs.rows(),
            actual: baseline.len(),
        });
    }
    if inputs.rows() == 0 {
        return Err(Error::invalid("empty test set"));
    }
    let labels = net.predict_labels(inputs, Some(mask))?;
    Ok(fraction_equal(&labels, baseline))
}

/// Grid must start at 0, increase strictly and stay below 1.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(Error::invalid("ablation grid must start at 0"));
    }
    if grid.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::invalid("ablation grid must be strictly increasing"));
    }
    if grid.iter().any(|&p| !(0.0..1.0).contains(&p)) {
        return Err(Error::invalid("ablation proportions must lie in [0, 1)"));
    }
    Ok(())
}

/// Random-ablation curve for hidden layer `layer`.
///
/// At each grid point `p`, `draws` masks each zero `round(p × width)`
/// uniformly chosen units of that layer. Draw `d` at grid index `i` uses the
/// generator `rng.child("ablation/layer{layer}/p{i}", d)`, so results do not
/// depend on evaluation order.
pub fn ablation_curve(
    net: &Mlp,
    inputs: &DenseMatrix,
    layer: usize,
    grid: &[f64],
    draws: usize,
    rng: &SeededRng,
) -> Result<AblationCurve> {
    curve_over_pool(net, inputs, layer, None, grid, draws, rng)
}

/// As [`ablation_curve`] but masks only draw from `pool`, with
/// `round(p × pool.len())` units ablated at each point.
pub fn ablation_curve_directed(
    net: &Mlp,
    inputs: &DenseMatrix,
    layer: usize,
    pool: &[usize],
    grid: &[f64],
    draws: usize,
    rng: &SeededRng,
) -> Result<AblationCurve> {
    curve_over_pool(net, inputs, layer, Some(pool), grid, draws, rng)
}

fn curve_over_pool(
    net: &Mlp,
    inputs: &DenseMatrix,
    layer: usize,
    pool: Option<&[usize]>,
    grid: &[f64],
    draws: usize,
    rng: &SeededRng,
) -> Result<AblationCurve> {
    let widths = net.hidden_widths();
    let width = *widths
        .get(layer)
        .ok_or_else(|| Error::invalid(format!("hidden layer {layer} out of range (network has {})", widths.len())))?;
    validate_grid(grid)?;
    if draws == 0 {
        return Err(Error::invalid("draws_per_point must be at least 1"));
    }
    if let Some(pool) = pool {
        if pool.iter().any(|&u| u >= width) {
            return Err(Error::invalid("directed pool contains a unit outside the layer"));
        }
    }
    let baseline = baseline_labels(net, inputs)?;
    let activations = net.hidden_activations(inputs, layer)?;
    let population = pool.map_or(width, <[usize]>::len);

    let cells: Vec<(usize, usize)> = (0..grid.len()).flat_map(|i| (0..draws).map(move |d| (i, d))).collect();
    let results: Vec<f64> = cells
        .par_iter()
        .map(|&(i, d)| -> Result<f64> {
            let k = (grid[i] * population as f64).round() as usize;
            if k == 0 {
                return Ok(1.0);
            }
            let mut cell_rng = rng.child(&format!("ablation/layer{layer}/p{i}"), d as u64);
            let picked = sample_without_replacement(population, k.min(population), &mut cell_rng)?;
            let units: Vec<usize> = match pool {
                Some(pool) => picked.iter().map(|&j| pool[j]).collect(),
                None => picked,
            };
            let mask = AblationMask::for_units(net, layer, &units)?;
            let logits = net.forward_from_hidden(&activations, layer, Some(&mask))?;
            Ok(fraction_equal(&labels_of(&logits), &baseline))
        })
        .collect::<Result<_>>()?;

    let (values, stds) = results
        .chunks(draws)
        .map(|c| (mean(c), sample_std(c)))
        .unzip();
    Ok(AblationCurve {
        layer: Some(layer),
        grid: grid.to_vec(),
        values,
        stds,
        draws_per_point: draws,
        seed: rng.base_seed(),
    })
}

/// One ablation curve and AUC per hidden layer, plus their mean.
pub fn removability_report(
    net: &Mlp,
    inputs: &DenseMatrix,
    grid: &[f64],
    draws: usize,
    rng: &SeededRng,
) -> Result<RemovabilityReport> {
    if net.num_hidden() == 0 {
        return Err(Error::invalid("network has no hidden layers"));
    }
    let curves = (0..net.num_hidden())
        .map(|layer| ablation_curve(net, inputs, layer, grid, draws, rng))
        .collect::<Result<Vec<_>>>()?;
    let layer_aucs = curves.iter().map(AblationCurve::auc).collect::<Result<Vec<_>>>()?;
    Ok(RemovabilityReport {
        mean_auc: mean(&layer_aucs),
        layer_aucs,
        curves,
        seed: rng.base_seed(),
    })
}

/// Column names of [`curve_records`].
pub const CURVE_COLUMNS: [&str; 5] = ["layer", "p", "draw_count", "unchanged_mean", "unchanged_std"];

/// One record per grid point; the layer-averaged curve is labelled `all`.
pub fn curve_records(curve: &AblationCurve) -> Vec<Vec<String>> {
    let layer = curve.layer.map_or_else(|| "all".to_string(), |l| l.to_string());
    curve
        .grid
        .iter()
        .zip(&curve.values)
        .zip(&curve.stds)
        .map(|((p, v), s)| {
            vec![
                layer.clone(),
                p.to_string(),
                curve.draws_per_point.to_string(),
                v.to_string(),
                s.to_string(),
            ]
        })
        .collect()
}

/// Writes `network_id, layer, p, draw_count, unchanged_mean, unchanged_std`
/// for every per-layer curve followed by the averaged curve.
pub fn write_curves_csv<W: std::io::Write>(out: W, network_id: &str, report: &RemovabilityReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once("network_id").chain(CURVE_COLUMNS))?;
    let averaged = report.averaged_curve();
    for curve in report.curves.iter().chain(std::iter::once(&averaged)) {
        for record in curve_records(curve) {
            w.write_record(std::iter::once(network_id.to_string()).chain(record))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `network_id, layer, auc` per hidden layer plus an `all` row with
/// the layer-averaged AUC.
pub fn write_auc_csv<W: std::io::Write>(out: W, network_id: &str, report: &RemovabilityReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["network_id", "layer", "auc"])?;
    for (layer, auc) in report.layer_aucs.iter().enumerate() {
        w.write_record([network_id.to_string(), layer.to_string(), auc.to_string()])?;
    }
    w.write_record([network_id.to_string(), "all".into(), report.mean_auc.to_string()])?;
    w.flush()?;
    Ok(())
}
