use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use unitcap::constructions::{merge_repeated, WideningRecipe};
use unitcap::datagen::read_csv;
use unitcap::mlp::{read_model, write_model, ConstructionProvenance, ModelMeta};
use unitcap::numerics::{DenseMatrix, SeededRng};
use unitcap::removability::{default_grid, removability_report, write_auc_csv, write_curves_csv, DEFAULT_DRAWS_PER_POINT};
use unitcap::repetition::{layerwise_repetition_report, DEFAULT_SAMPLINGS, DEFAULT_THRESHOLD, DEFAULT_UNIT_CAP};
use unitcap::runner::{
    enumerate_cells, factor_means, prepare_data, read_results, run_sweep, student_width, summarize, tune_and_train,
    write_summary, write_sweep, CellSpec, ExperimentConfig, SweepOptions, DEFAULT_BASE_SEED,
};
use unitcap::training::accuracy;
use unitcap::{Error, Result};

#[derive(Parser)]
#[command(name = "unitcap", version, about = "Removable and repeated unit analysis for small MLPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a balanced teacher and write train/validation/test CSVs.
    GenData(GenDataArgs),
    /// Train one student with learning-rate tuning.
    Train(TrainArgs),
    /// Ablation curves and AUCs for a model file.
    Ablate(AblateArgs),
    /// Pairwise correlation summaries for a model file.
    Correlate(CorrelateArgs),
    /// Apply a widening recipe or merge two repeated units.
    Construct(ConstructArgs),
    /// Run a size-factor sweep.
    Sweep(SweepArgs),
    /// Trend statistics from a results.csv.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input dimension; overrides the configuration.
    #[arg(long)]
    input_dim: Option<usize>,
    /// Base seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = match (&self.config, self.input_dim) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(dim)) => ExperimentConfig::new(dim),
            (None, None) => return Err(Error::Config("pass --config or --input-dim".into())),
        };
        if let Some(dim) = self.input_dim {
            config.input_dim = dim;
        }
        if let Some(seed) = self.seed {
            config.base_seed = seed;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 1.0)]
    size_factor: f64,
    #[arg(long, default_value_t = 0)]
    replicate: usize,
    /// Train at this rate only instead of tuning over the configured grid.
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelInput {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    /// Dataset CSV whose inputs are evaluated (labels are ignored).
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    input: ModelInput,
    /// Ablation proportions, comma separated; defaults to 0, 0.05, ..., 0.95.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_DRAWS_PER_POINT)]
    draws: usize,
    #[arg(long, default_value_t = DEFAULT_BASE_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    #[command(flatten)]
    input: ModelInput,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_UNIT_CAP)]
    cap: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLINGS)]
    samplings: usize,
    #[arg(long, default_value_t = DEFAULT_BASE_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstructKind {
    DuplicateZero,
    DeadUnits,
    Uncorrelated,
    Eta,
    Merge,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    kind: ConstructKind,
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    #[arg(long)]
    pad_seed: Option<u64>,
    /// Merge: hidden layer index.
    #[arg(long, default_value_t = 0)]
    layer: usize,
    /// Merge: unit that survives.
    #[arg(long)]
    keep: Option<usize>,
    /// Merge: unit that is removed; its activation must equal gamma times the kept unit's.
    #[arg(long)]
    remove: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Merge: dataset CSV used to verify the repetition.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Use the desk-scale size factors and replicate count.
    #[arg(long)]
    desk_scale: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    /// A results.csv, or a directory containing one.
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn load_inputs(path: &Path) -> Result<DenseMatrix> {
    Ok(read_csv(path)?.0)
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let config = args.config.load()?;
    create_dir(&args.out)?;
    let data = prepare_data(&config)?;
    for (role, set) in [("train", &data.train), ("validation", &data.validation), ("test", &data.test)] {
        set.write_csv(File::create(args.out.join(format!("{role}.csv")))?)?;
    }
    let meta = ModelMeta {
        network_id: "teacher".into(),
        init: Some(unitcap::mlp::InitSpec::fixed_sigma(unitcap::datagen::TEACHER_SIGMA)),
        training_seed: None,
        provenance: None,
    };
    write_model(&args.out.join("teacher.json"), &data.teacher.net, &meta)?;
    write_json(&args.out.join("datasets.json"), &data.metadata())?;
    println!(
        "teacher seed {} balance {} after {} attempt(s)",
        data.teacher.seed, data.teacher.probe_balance, data.teacher.attempts
    );
    Ok(())
}

fn train_one(args: TrainArgs) -> Result<()> {
    let mut config = args.config.load()?;
    config.size_factors = vec![args.size_factor];
    config.replicates = args.replicate + 1;
    config.validate()?;
    create_dir(&args.out)?;
    let data = prepare_data(&config)?;
    let cell: CellSpec = enumerate_cells(&config)
        .into_iter()
        .find(|c| c.replicate == args.replicate)
        .expect("replicate is enumerated");
    let rates = args.learning_rate.map_or_else(|| config.learning_rates.clone(), |lr| vec![lr]);
    let tuned = tune_and_train(&config, &data, &cell, &rates)?;

    let network_id = format!("student-w{}-r{}", student_width(config.base_hidden_width, args.size_factor), args.replicate);
    let meta = ModelMeta {
        network_id: network_id.clone(),
        init: Some(cell.init),
        training_seed: Some(cell.shuffle_seed),
        provenance: None,
    };
    write_model(&args.out.join("model.json"), &tuned.net, &meta)?;

    let mut w = csv::Writer::from_path(args.out.join("history.csv"))?;
    w.write_record(["run_id", "epoch", "train_loss", "train_acc", "val_acc"])?;
    for h in &tuned.history {
        w.write_record([
            network_id.clone(),
            h.epoch.to_string(),
            h.train_loss.to_string(),
            h.train_acc.to_string(),
            h.val_acc.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let test_accuracy = accuracy(&tuned.net, data.test.examples())?;
    let metrics = serde_json::json!({
        "network_id": network_id,
        "learning_rate": tuned.learning_rate,
        "validation_accuracy": tuned.validation_accuracy,
        "train_accuracy": accuracy(&tuned.net, data.train.examples())?,
        "test_accuracy": test_accuracy,
        "init_seed": cell.init_seed,
        "shuffle_seed": cell.shuffle_seed,
        "base_seed": config.base_seed,
        "tuning": tuned.tuning,
    });
    write_json(&args.out.join("metrics.json"), &metrics)?;
    println!("learning_rate {} test_accuracy {}", tuned.learning_rate, test_accuracy);
    Ok(())
}

fn ablate(args: AblateArgs) -> Result<()> {
    let (net, meta) = read_model(&args.input.model)?;
    let inputs = load_inputs(&args.input.data)?;
    let grid = args.grid.unwrap_or_else(default_grid);
    let report = removability_report(&net, &inputs, &grid, args.draws, &SeededRng::new(args.seed))?;
    create_dir(&args.out)?;
    write_curves_csv(File::create(args.out.join("curves.csv"))?, &meta.network_id, &report)?;
    write_auc_csv(File::create(args.out.join("auc.csv"))?, &meta.network_id, &report)?;
    println!("mean_auc {}", report.mean_auc);
    Ok(())
}

fn correlate(args: CorrelateArgs) -> Result<()> {
    let (net, meta) = read_model(&args.input.model)?;
    let inputs = load_inputs(&args.input.data)?;
    let report = layerwise_repetition_report(
        &net,
        &inputs,
        args.threshold,
        args.cap,
        args.samplings,
        &SeededRng::new(args.seed),
    )?;
    create_dir(&args.out)?;
    unitcap::repetition::write_csv(File::create(args.out.join("correlations.csv"))?, &meta.network_id, &report)?;
    println!(
        "mean_similarity {} std {} dead_units {}",
        report.mean_similarity, report.mean_similarity_std, report.dead_units
    );
    Ok(())
}

fn construct(args: ConstructArgs) -> Result<()> {
    let (net, meta) = read_model(&args.model)?;
    let required = |what: &str| Error::Config(format!("--kind requires --{what}"));
    let (widened, provenance) = match args.kind {
        ConstructKind::Merge => {
            let keep = args.keep.ok_or_else(|| required("keep"))?;
            let remove = args.remove.ok_or_else(|| required("remove"))?;
            let data = args.data.as_deref().ok_or_else(|| required("data"))?;
            let merged = merge_repeated(&net, &load_inputs(data)?, args.layer, keep, remove, args.gamma)?;
            let provenance = ConstructionProvenance {
                recipe: "merge".into(),
                source_network_id: meta.network_id.clone(),
                detail: Some(format!(
                    "layer={} keep={} remove={} gamma={}",
                    args.layer, keep, remove, args.gamma
                )),
                ..ConstructionProvenance::default()
            };
            (merged, provenance)
        }
        kind => {
            let recipe = match kind {
                ConstructKind::DuplicateZero => WideningRecipe::DuplicateZero,
                ConstructKind::DeadUnits => WideningRecipe::DeadUnits,
                ConstructKind::Uncorrelated => WideningRecipe::UncorrelatedPad {
                    pad_seed: args.pad_seed.ok_or_else(|| required("pad-seed"))?,
                },
                ConstructKind::Eta => WideningRecipe::EtaDuplicate {
                    eta: args.eta.ok_or_else(|| required("eta"))?,
                },
                ConstructKind::Merge => unreachable!(),
            };
            (recipe.apply(&net)?, recipe.provenance(&meta.network_id))
        }
    };
    create_dir(&args.out)?;
    let out_meta = ModelMeta {
        network_id: format!("{}+{}", meta.network_id, provenance.recipe),
        init: meta.init,
        training_seed: meta.training_seed,
        provenance: Some(provenance),
    };
    write_model(&args.out.join("model.json"), &widened, &out_meta)?;
    println!("{} hidden widths {:?}", out_meta.network_id, widened.hidden_widths());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    let output = run_sweep(
        &config,
        SweepOptions {
            threads: args.threads,
            desk_scale: args.desk_scale,
        },
    )?;
    create_dir(&args.out)?;
    let meta = write_sweep(&args.out, &output)?;
    println!(
        "{} result rows ({} errors); summary: {}",
        meta.result_rows, meta.error_rows, meta.summary_status
    );
    Ok(())
}

fn summarize_results(args: SummarizeArgs) -> Result<()> {
    let path = if args.results.is_dir() {
        args.results.join("results.csv")
    } else {
        args.results
    };
    let rows = read_results(&path)?;
    let cells = summarize(&rows)?;
    create_dir(&args.out)?;
    write_summary(&args.out, &cells, &factor_means(&rows))?;
    for c in &cells {
        println!(
            "{} / {}: spearman_auc {} spearman_similarity {} verdict {}",
            c.init, c.optimizer, c.spearman_auc, c.spearman_similarity, c.verdict
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_one(a),
        Command::Ablate(a) => ablate(a),
        Command::Correlate(a) => correlate(a),
        Command::Construct(a) => construct(a),
        Command::Sweep(a) => sweep(a),
        Command::Summarize(a) => summarize_results(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
