use serde::{Deserialize, Serialize};

use super::RunRow;
use crate::error::{Error, Result};
use crate::numerics::{mean, spearman};

/// Replicate means of one size factor within a configuration cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorMeans {
    pub init: String,
    pub optimizer: String,
    pub size_factor: f64,
    pub hidden_width: usize,
    pub ok_rows: usize,
    pub error_rows: usize,
    pub test_accuracy: f64,
    pub train_accuracy: f64,
    pub mean_auc: f64,
    pub similarity: f64,
}

/// Size trend of one (init, optimizer) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub init: String,
    pub optimizer: String,
    pub factors: usize,
    pub ok_rows: usize,
    pub error_rows: usize,
    pub spearman_auc: f64,
    pub spearman_similarity: f64,
    /// `spearman_auc > 0 || spearman_similarity > 0`.
    pub verdict: bool,
    pub smallest_factor: f64,
    pub largest_factor: f64,
    pub auc_smallest: f64,
    pub auc_largest: f64,
    pub similarity_smallest: f64,
    pub similarity_largest: f64,
    pub test_accuracy_smallest: f64,
    pub test_accuracy_largest: f64,
    pub auc_relative_change: f64,
    pub similarity_relative_change: f64,
}

/// `|b − a| / |a|`, with 0 when `a == b` (including both zero) and
/// infinity when only `a` is zero.
pub fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else if a == 0.0 {
        f64::INFINITY
    } else {
        (b - a).abs() / a.abs()
    }
}

fn cell_key(row: &RunRow) -> (String, String) {
    (row.init.clone(), row.optimizer.clone())
}

/// Per-factor replicate means for every cell, in first-appearance order.
/// Error rows are counted but contribute no values.
pub fn factor_means(rows: &[RunRow]) -> Vec<FactorMeans> {
    let mut keys: Vec<(String, String, u64)> = Vec::new();
    for row in rows {
        let key = (row.init.clone(), row.optimizer.clone(), row.size_factor.to_bits());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(init, optimizer, bits)| {
            let group: Vec<&RunRow> = rows
                .iter()
                .filter(|r| r.init == init && r.optimizer == optimizer && r.size_factor.to_bits() == bits)
                .collect();
            let ok: Vec<&RunRow> = group.iter().copied().filter(|r| r.is_ok()).collect();
            let avg = |f: fn(&RunRow) -> Option<f64>| mean(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            FactorMeans {
                size_factor: f64::from_bits(bits),
                hidden_width: group[0].hidden_width,
                ok_rows: ok.len(),
                error_rows: group.len() - ok.len(),
                test_accuracy: avg(|r| r.test_accuracy),
                train_accuracy: avg(|r| r.train_accuracy),
                mean_auc: avg(|r| r.mean_auc),
                similarity: avg(|r| r.similarity_mean),
                init,
                optimizer,
            }
        })
        .collect()
}

/// Spearman correlation of size factor against replicate-mean AUC and
/// similarity for every (init, optimizer) cell.
///
/// Factors whose rows all failed are dropped; a cell left with fewer than
/// three factors is an insufficient-data error.
pub fn summarize(rows: &[RunRow]) -> Result<Vec<CellSummary>> {
    let means = factor_means(rows);
    let mut cells: Vec<(String, String)> = Vec::new();
    for row in rows {
        if !cells.contains(&cell_key(row)) {
            cells.push(cell_key(row));
        }
    }
    cells
        .into_iter()
        .map(|(init, optimizer)| {
            let all: Vec<&FactorMeans> = means.iter().filter(|m| m.init == init && m.optimizer == optimizer).collect();
            let mut usable: Vec<&FactorMeans> = all.iter().copied().filter(|m| m.ok_rows > 0).collect();
            if usable.len() < 3 {
                return Err(Error::InsufficientData(format!(
                    "cell {init} / {optimizer} has {} size factors with results; at least 3 are needed",
                    usable.len()
                )));
            }
            usable.sort_by(|a, b| a.size_factor.total_cmp(&b.size_factor));
            let factors: Vec<f64> = usable.iter().map(|m| m.size_factor).collect();
            let aucs: Vec<f64> = usable.iter().map(|m| m.mean_auc).collect();
            let sims: Vec<f64> = usable.iter().map(|m| m.similarity).collect();
            let spearman_auc = spearman(&factors, &aucs)?;
            let spearman_similarity = spearman(&factors, &sims)?;
            let (first, last) = (usable[0], usable[usable.len() - 1]);
            Ok(CellSummary {
                factors: usable.len(),
                ok_rows: all.iter().map(|m| m.ok_rows).sum(),
                error_rows: all.iter().map(|m| m.error_rows).sum(),
                verdict: spearman_auc > 0.0 || spearman_similarity > 0.0,
                spearman_auc,
                spearman_similarity,
                smallest_factor: first.size_factor,
                largest_factor: last.size_factor,
                auc_smallest: first.mean_auc,
                auc_largest: last.mean_auc,
                similarity_smallest: first.similarity,
                similarity_largest: last.similarity,
                test_accuracy_smallest: first.test_accuracy,
                test_accuracy_largest: last.test_accuracy,
                auc_relative_change: relative_change(first.mean_auc, last.mean_auc),
                similarity_relative_change: relative_change(first.similarity, last.similarity),
                init,
                optimizer,
            })
        })
        .collect()
}
