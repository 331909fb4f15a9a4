//! Size-factor sweeps.
//!
//! A sweep trains one student per (init, optimizer, size factor, replicate)
//! on a shared teacher dataset, tunes the learning rate on a fixed grid by
//! final validation accuracy, and measures removability and repetition on the
//! shared test set. Every seed is derived from `base_seed` with
//! [`derive_seed`], so a cell can be rerun in isolation from its row.

mod config;
mod output;
mod summary;

pub use config::{
    student_width, DataConfig, DeskScaleConfig, ExperimentConfig, TrainingConfig, DEFAULT_BASE_SEED,
    DEFAULT_LEARNING_RATES, DEFAULT_SIZE_FACTORS, DESK_SCALE_REPLICATES, DESK_SCALE_SIZE_FACTORS,
};
pub use output::{read_results, write_results, write_summary, write_sweep, RunMetadata};
pub use summary::{factor_means, relative_change, summarize, CellSummary, FactorMeans};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{find_teacher, generate, DatasetMetadata, SyntheticDataset, Teacher};
use crate::error::{Error, Result};
use crate::mlp::{build_mlp, InitSpec, Mlp};
use crate::numerics::{derive_seed, SeededRng};
use crate::removability::{removability_report, AblationCurve};
use crate::repetition::{layerwise_repetition_report, RepetitionReport};
use crate::training::{accuracy, train, EpochRecord, OptimizerKind, OptimizerSpec, TrainOutcome};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    #[default]
    Ok,
    Error,
}

/// One row of `results.csv`: a single (init, optimizer, factor, replicate).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: String,
    pub input_dim: usize,
    pub init: String,
    pub optimizer: String,
    pub size_factor: f64,
    pub hidden_width: usize,
    pub replicate: usize,
    pub status: RowStatus,
    pub error: String,
    pub learning_rate: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub validation_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub mean_auc: Option<f64>,
    /// Per-layer AUCs joined by `;`.
    pub layer_aucs: String,
    pub similarity_mean: Option<f64>,
    pub similarity_std: Option<f64>,
    pub dead_units: Option<f64>,
    pub base_seed: u64,
    pub teacher_seed: u64,
    pub train_data_seed: u64,
    pub validation_data_seed: u64,
    pub test_data_seed: u64,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub ablation_seed: u64,
    pub correlation_seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate_grid: String,
    pub ablation_grid: String,
    pub ablation_draws: usize,
    pub similarity_threshold: f64,
    pub unit_cap: usize,
    pub samplings: usize,
}

impl RunRow {
    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }
}

/// Teacher and datasets shared by every cell of a sweep.
#[derive(Clone, Debug)]
pub struct SweepData {
    pub teacher: Teacher,
    pub train: SyntheticDataset,
    pub validation: SyntheticDataset,
    pub test: SyntheticDataset,
}

impl SweepData {
    pub fn metadata(&self) -> Vec<DatasetMetadata> {
        vec![
            self.train.metadata("train", &self.teacher),
            self.validation.metadata("validation", &self.teacher),
            self.test.metadata("test", &self.teacher),
        ]
    }
}

pub fn data_seed(base_seed: u64, role: &str) -> u64 {
    derive_seed(base_seed, &format!("data/{role}"), 0)
}

/// Teacher search from `derive_seed(base, "teacher", 0)` and the three
/// datasets from `data_seed(base, role)`.
pub fn prepare_data(config: &ExperimentConfig) -> Result<SweepData> {
    let teacher_rng = SeededRng::new(derive_seed(config.base_seed, "teacher", 0));
    let teacher = find_teacher(config.input_dim, &teacher_rng, config.data.teacher_max_attempts)?;
    let make = |role: &str, n: usize| generate(&teacher, n, data_seed(config.base_seed, role));
    Ok(SweepData {
        train: make("train", config.data.train_size)?,
        validation: make("validation", config.data.validation_size)?,
        test: make("test", config.data.test_size)?,
        teacher,
    })
}

/// Coordinates and derived seeds of one sweep cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSpec {
    pub run_id: String,
    pub init: InitSpec,
    pub optimizer: OptimizerKind,
    pub size_factor: f64,
    pub hidden_width: usize,
    pub replicate: usize,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub ablation_seed: u64,
    pub correlation_seed: u64,
}

/// Cells in output order: init, then optimizer, then factor, then replicate.
///
/// Replicate `r` of width `w` gets the same initialization, shuffle, ablation
/// and sampling seeds in every (init, optimizer) cell.
pub fn enumerate_cells(config: &ExperimentConfig) -> Vec<CellSpec> {
    let base = config.base_seed;
    let mut cells = Vec::new();
    for (ii, init) in config.inits.iter().enumerate() {
        for (oi, optimizer) in config.optimizers.iter().enumerate() {
            for (fi, &size_factor) in config.size_factors.iter().enumerate() {
                let width = student_width(config.base_hidden_width, size_factor);
                for replicate in 0..config.replicates {
                    let r = replicate as u64;
                    cells.push(CellSpec {
                        run_id: format!("i{ii}-o{oi}-f{fi}-r{replicate}"),
                        init: *init,
                        optimizer: *optimizer,
                        size_factor,
                        hidden_width: width,
                        replicate,
                        init_seed: derive_seed(base, &format!("init/w{width}"), r),
                        shuffle_seed: derive_seed(base, "shuffle", r),
                        ablation_seed: derive_seed(base, &format!("ablation/w{width}"), r),
                        correlation_seed: derive_seed(base, &format!("correlation/w{width}"), r),
                    });
                }
            }
        }
    }
    cells
}

/// Outcome of one learning-rate candidate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuningRecord {
    pub learning_rate: f64,
    /// Final-epoch validation accuracy; `None` if training diverged.
    pub validation_accuracy: Option<f64>,
    pub diverged_at_epoch: Option<usize>,
}

/// Everything one cell produces.
#[derive(Clone, Debug)]
pub struct CellOutput {
    pub row: RunRow,
    /// Per-layer curves followed by the layer-averaged curve.
    pub curves: Vec<AblationCurve>,
    pub repetition: Option<RepetitionReport>,
    /// History of the selected learning rate.
    pub history: Vec<EpochRecord>,
    pub tuning: Vec<TuningRecord>,
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn base_row(config: &ExperimentConfig, data: &SweepData, cell: &CellSpec) -> RunRow {
    RunRow {
        run_id: cell.run_id.clone(),
        input_dim: config.input_dim,
        init: cell.init.label(),
        optimizer: cell.optimizer.label(),
        size_factor: cell.size_factor,
        hidden_width: cell.hidden_width,
        replicate: cell.replicate,
        base_seed: config.base_seed,
        teacher_seed: data.teacher.seed,
        train_data_seed: data.train.data_seed,
        validation_data_seed: data.validation.data_seed,
        test_data_seed: data.test.data_seed,
        init_seed: cell.init_seed,
        shuffle_seed: cell.shuffle_seed,
        ablation_seed: cell.ablation_seed,
        correlation_seed: cell.correlation_seed,
        epochs: config.training.epochs,
        batch_size: config.training.batch_size,
        learning_rate_grid: join(&config.learning_rates),
        ablation_grid: join(&config.ablation_grid),
        ablation_draws: config.ablation_draws,
        similarity_threshold: config.similarity_threshold,
        unit_cap: config.unit_cap,
        samplings: config.samplings,
        ..RunRow::default()
    }
}

/// Trains, tunes and measures one cell. Failures become an error row.
pub fn run_cell(config: &ExperimentConfig, data: &SweepData, cell: &CellSpec) -> CellOutput {
    let mut out = CellOutput {
        row: base_row(config, data, cell),
        curves: Vec::new(),
        repetition: None,
        history: Vec::new(),
        tuning: Vec::new(),
    };
    if let Err(e) = fill_cell(config, data, cell, &mut out) {
        out.row.status = RowStatus::Error;
        out.row.error = e.to_string();
    }
    out
}

/// Student selected by learning-rate tuning.
#[derive(Clone, Debug)]
pub struct TunedStudent {
    pub net: Mlp,
    pub learning_rate: f64,
    pub validation_accuracy: f64,
    pub history: Vec<EpochRecord>,
    pub tuning: Vec<TuningRecord>,
}

/// Trains the cell's student once per learning rate in `learning_rates`,
/// from the same initialization and shuffle seed, and keeps the run with the
/// highest final validation accuracy (earliest grid entry on ties).
/// Diverged candidates are recorded and skipped.
pub fn tune_and_train(
    config: &ExperimentConfig,
    data: &SweepData,
    cell: &CellSpec,
    learning_rates: &[f64],
) -> Result<TunedStudent> {
    let hidden = vec![cell.hidden_width; config.hidden_layers];
    let initial = build_mlp(config.input_dim, &hidden, 2, &cell.init, &mut SeededRng::new(cell.init_seed))?;
    let spec = config.training.train_spec(cell.shuffle_seed);

    let mut tuning = Vec::with_capacity(learning_rates.len());
    let mut best: Option<(f64, f64, TrainOutcome)> = None;
    for &lr in learning_rates {
        let opt = OptimizerSpec::new(cell.optimizer, lr);
        match train(&initial, data.train.examples(), Some(data.validation.examples()), &spec, &opt) {
            Ok(outcome) => {
                let val = outcome
                    .history
                    .last()
                    .and_then(|h| h.val_acc)
                    .expect("final epoch is always validated");
                tuning.push(TuningRecord {
                    learning_rate: lr,
                    validation_accuracy: Some(val),
                    diverged_at_epoch: None,
                });
                if best.as_ref().is_none_or(|(_, b, _)| val > *b) {
                    best = Some((lr, val, outcome));
                }
            }
            Err(Error::Diverged { epoch }) => tuning.push(TuningRecord {
                learning_rate: lr,
                validation_accuracy: None,
                diverged_at_epoch: Some(epoch),
            }),
            Err(e) => return Err(e),
        }
    }
    let (learning_rate, validation_accuracy, outcome) =
        best.ok_or_else(|| Error::invalid("training diverged at every learning rate in the grid"))?;
    Ok(TunedStudent {
        net: outcome.net,
        learning_rate,
        validation_accuracy,
        history: outcome.history,
        tuning,
    })
}

fn fill_cell(config: &ExperimentConfig, data: &SweepData, cell: &CellSpec, out: &mut CellOutput) -> Result<()> {
    let tuned = tune_and_train(config, data, cell, &config.learning_rates)?;
    let net = tuned.net;
    out.history = tuned.history;
    out.tuning = tuned.tuning;
    out.row.learning_rate = Some(tuned.learning_rate);
    out.row.validation_accuracy = Some(tuned.validation_accuracy);
    out.row.train_accuracy = Some(accuracy(&net, data.train.examples())?);
    out.row.test_accuracy = Some(accuracy(&net, data.test.examples())?);

    let removability = removability_report(
        &net,
        &data.test.inputs,
        &config.ablation_grid,
        config.ablation_draws,
        &SeededRng::new(cell.ablation_seed),
    )?;
    out.row.mean_auc = Some(removability.mean_auc);
    out.row.layer_aucs = join(&removability.layer_aucs);
    let averaged = removability.averaged_curve();
    out.curves = removability.curves;
    out.curves.push(averaged);

    let mut repetition = layerwise_repetition_report(
        &net,
        &data.test.inputs,
        config.similarity_threshold,
        config.unit_cap,
        config.samplings,
        &SeededRng::new(cell.correlation_seed),
    )?;
    for layer in &mut repetition.layers {
        for s in &mut layer.summaries {
            s.coefficients = Vec::new();
        }
    }
    out.row.similarity_mean = Some(repetition.mean_similarity);
    out.row.similarity_std = Some(repetition.mean_similarity_std);
    out.row.dead_units = Some(repetition.dead_units);
    out.repetition = Some(repetition);
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepOptions {
    /// Worker threads; `None` uses the global default.
    pub threads: Option<usize>,
    pub desk_scale: bool,
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    /// Configuration after desk-scale adjustments.
    pub config: ExperimentConfig,
    pub desk_scale: bool,
    pub data: SweepData,
    pub cells: Vec<CellOutput>,
}

impl SweepOutput {
    pub fn rows(&self) -> Vec<RunRow> {
        self.cells.iter().map(|c| c.row.clone()).collect()
    }
}

/// Runs every cell on a bounded worker pool; results keep config order.
pub fn run_sweep(config: &ExperimentConfig, options: SweepOptions) -> Result<SweepOutput> {
    let mut config = config.clone();
    if options.desk_scale {
        config.apply_desk_scale();
    }
    config.validate()?;
    let data = prepare_data(&config)?;
    let cells = enumerate_cells(&config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let outputs = pool.install(|| cells.par_iter().map(|c| run_cell(&config, &data, c)).collect());
    Ok(SweepOutput {
        config,
        desk_scale: options.desk_scale,
        data,
        cells: outputs,
    })
}
