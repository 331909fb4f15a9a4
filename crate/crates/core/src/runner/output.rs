use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{factor_means, summarize, CellSummary, ExperimentConfig, FactorMeans, RunRow, SweepOutput};
use crate::datagen::DatasetMetadata;
use crate::error::Result;
use crate::numerics::RNG_ALGORITHM;
use crate::removability::{curve_records, CURVE_COLUMNS};
use crate::repetition::{summary_columns, summary_records};

/// Contents of `run-metadata.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub artifact: String,
    pub artifact_version: String,
    pub rng_algorithm: String,
    pub desk_scale: bool,
    /// Effective configuration after desk-scale adjustments.
    pub config: ExperimentConfig,
    pub teacher_seed: u64,
    pub teacher_probe_balance: f64,
    pub teacher_attempts: usize,
    pub datasets: Vec<DatasetMetadata>,
    pub result_rows: usize,
    pub error_rows: usize,
    /// `ok`, or the reason `summary.csv` was not written.
    pub summary_status: String,
}

const CELL_COLUMNS: [&str; 5] = ["run_id", "init", "optimizer", "size_factor", "replicate"];

fn cell_prefix(row: &RunRow) -> Vec<String> {
    vec![
        row.run_id.clone(),
        row.init.clone(),
        row.optimizer.clone(),
        row.size_factor.to_string(),
        row.replicate.to_string(),
    ]
}

fn with_prefix<I: IntoIterator<Item = String>>(prefix: &[String], rest: I) -> Vec<String> {
    prefix.iter().cloned().chain(rest).collect()
}

pub fn write_results<W: Write>(out: W, rows: &[RunRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<RunRow>, _>>()?;
    Ok(rows)
}

/// Writes `summary.csv` (one row per cell) and `trends.csv` (one row per
/// cell and size factor).
pub fn write_summary(dir: &Path, cells: &[CellSummary], trends: &[FactorMeans]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    for c in cells {
        w.serialize(c)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("trends.csv"))?;
    for t in trends {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every sweep output into `dir`, which must exist.
///
/// Files: `results.csv`, `curves.csv`, `correlations.csv`, `history.csv`,
/// `tuning.csv`, `summary.csv` and `trends.csv` (when at least three size
/// factors have results) and `run-metadata.json`.
pub fn write_sweep(dir: &Path, sweep: &SweepOutput) -> Result<RunMetadata> {
    let rows = sweep.rows();
    write_results(File::create(dir.join("results.csv"))?, &rows)?;

    let mut curves = csv::Writer::from_path(dir.join("curves.csv"))?;
    curves.write_record(CELL_COLUMNS.iter().chain(CURVE_COLUMNS.iter()))?;
    let mut correlations = csv::Writer::from_path(dir.join("correlations.csv"))?;
    correlations.write_record(CELL_COLUMNS.iter().map(|s| s.to_string()).chain(summary_columns()))?;
    let mut history = csv::Writer::from_path(dir.join("history.csv"))?;
    history.write_record(["run_id", "learning_rate", "epoch", "train_loss", "train_acc", "val_acc"])?;
    let mut tuning = csv::Writer::from_path(dir.join("tuning.csv"))?;
    tuning.write_record(["run_id", "learning_rate", "validation_accuracy", "diverged_at_epoch"])?;

    let opt = |v: Option<String>| v.unwrap_or_default();
    for cell in &sweep.cells {
        let prefix = cell_prefix(&cell.row);
        for curve in &cell.curves {
            for rec in curve_records(curve) {
                curves.write_record(with_prefix(&prefix, rec))?;
            }
        }
        if let Some(rep) = &cell.repetition {
            for rec in summary_records(rep) {
                correlations.write_record(with_prefix(&prefix, rec))?;
            }
        }
        let lr = opt(cell.row.learning_rate.map(|v| v.to_string()));
        for h in &cell.history {
            history.write_record([
                cell.row.run_id.clone(),
                lr.clone(),
                h.epoch.to_string(),
                h.train_loss.to_string(),
                h.train_acc.to_string(),
                opt(h.val_acc.map(|v| v.to_string())),
            ])?;
        }
        for t in &cell.tuning {
            tuning.write_record([
                cell.row.run_id.clone(),
                t.learning_rate.to_string(),
                opt(t.validation_accuracy.map(|v| v.to_string())),
                opt(t.diverged_at_epoch.map(|v| v.to_string())),
            ])?;
        }
    }
    curves.flush()?;
    correlations.flush()?;
    history.flush()?;
    tuning.flush()?;

    let summary_status = match summarize(&rows) {
        Ok(cells) => {
            write_summary(dir, &cells, &factor_means(&rows))?;
            "ok".to_string()
        }
        Err(e) => e.to_string(),
    };
    let meta = RunMetadata {
        artifact: env!("CARGO_PKG_NAME").to_string(),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        desk_scale: sweep.desk_scale,
        config: sweep.config.clone(),
        teacher_seed: sweep.data.teacher.seed,
        teacher_probe_balance: sweep.data.teacher.probe_balance,
        teacher_attempts: sweep.data.teacher.attempts,
        datasets: sweep.data.metadata(),
        result_rows: rows.len(),
        error_rows: rows.iter().filter(|r| !r.is_ok()).count(),
        summary_status,
    };
    let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    text.push('\n');
    std::fs::write(dir.join("run-metadata.json"), text)?;
    Ok(meta)
}
