use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::InitSpec;
use crate::removability::{default_grid, validate_grid, DEFAULT_DRAWS_PER_POINT};
use crate::repetition::{DEFAULT_SAMPLINGS, DEFAULT_THRESHOLD, DEFAULT_UNIT_CAP};
use crate::training::{OptimizerKind, TrainSpec};

pub const DEFAULT_SIZE_FACTORS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const DEFAULT_LEARNING_RATES: [f64; 5] = [0.3, 0.1, 0.03, 0.01, 0.003];
pub const DESK_SCALE_SIZE_FACTORS: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
pub const DESK_SCALE_REPLICATES: usize = 1;
pub const DEFAULT_BASE_SEED: u64 = 1;

/// Sweep definition, read from TOML. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input_dim: usize,
    #[serde(default = "default_size_factors")]
    pub size_factors: Vec<f64>,
    #[serde(default = "default_base_width")]
    pub base_hidden_width: usize,
    #[serde(default = "default_one")]
    pub hidden_layers: usize,
    #[serde(default = "default_inits")]
    pub inits: Vec<InitSpec>,
    #[serde(default = "default_optimizers")]
    pub optimizers: Vec<OptimizerKind>,
    #[serde(default = "default_learning_rates")]
    pub learning_rates: Vec<f64>,
    #[serde(default = "default_three")]
    pub replicates: usize,
    #[serde(default = "default_samplings")]
    pub samplings: usize,
    #[serde(default = "default_threshold")]
    pub similarity_threshold: f64,
    #[serde(default = "default_unit_cap")]
    pub unit_cap: usize,
    #[serde(default = "default_grid")]
    pub ablation_grid: Vec<f64>,
    #[serde(default = "default_draws")]
    pub ablation_draws: usize,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub desk_scale: DeskScaleConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_dataset_size")]
    pub train_size: usize,
    #[serde(default = "default_dataset_size")]
    pub validation_size: usize,
    #[serde(default = "default_dataset_size")]
    pub test_size: usize,
    #[serde(default = "default_teacher_attempts")]
    pub teacher_max_attempts: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train_size: default_dataset_size(),
            validation_size: default_dataset_size(),
            test_size: default_dataset_size(),
            teacher_max_attempts: default_teacher_attempts(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_true")]
    pub shuffle_each_epoch: bool,
    /// Epochs between validation passes; omitted means the final epoch only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_interval: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            shuffle_each_epoch: true,
            validation_interval: None,
        }
    }
}

impl TrainingConfig {
    pub fn train_spec(&self, seed: u64) -> TrainSpec {
        TrainSpec {
            epochs: self.epochs,
            batch_size: self.batch_size,
            shuffle_each_epoch: self.shuffle_each_epoch,
            seed,
            validation_interval: self.validation_interval.unwrap_or(self.epochs),
        }
    }
}

/// Replacements applied by `--desk-scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeskScaleConfig {
    #[serde(default = "default_desk_factors")]
    pub size_factors: Vec<f64>,
    #[serde(default = "default_desk_replicates")]
    pub replicates: usize,
}

impl Default for DeskScaleConfig {
    fn default() -> Self {
        Self {
            size_factors: default_desk_factors(),
            replicates: default_desk_replicates(),
        }
    }
}

fn default_size_factors() -> Vec<f64> {
    DEFAULT_SIZE_FACTORS.to_vec()
}
fn default_desk_factors() -> Vec<f64> {
    DESK_SCALE_SIZE_FACTORS.to_vec()
}
fn default_desk_replicates() -> usize {
    DESK_SCALE_REPLICATES
}
fn default_base_width() -> usize {
    128
}
fn default_one() -> usize {
    1
}
fn default_three() -> usize {
    3
}
fn default_true() -> bool {
    true
}
fn default_samplings() -> usize {
    DEFAULT_SAMPLINGS
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_unit_cap() -> usize {
    DEFAULT_UNIT_CAP
}
fn default_draws() -> usize {
    DEFAULT_DRAWS_PER_POINT
}
fn default_base_seed() -> u64 {
    DEFAULT_BASE_SEED
}
fn default_inits() -> Vec<InitSpec> {
    vec![InitSpec::fixed_sigma(0.01)]
}
fn default_optimizers() -> Vec<OptimizerKind> {
    vec![OptimizerKind::momentum()]
}
fn default_learning_rates() -> Vec<f64> {
    DEFAULT_LEARNING_RATES.to_vec()
}
fn default_dataset_size() -> usize {
    1000
}
fn default_teacher_attempts() -> usize {
    1000
}
fn default_epochs() -> usize {
    50
}
fn default_batch_size() -> usize {
    32
}

/// `max(1, round(base × factor))`.
pub fn student_width(base: usize, factor: f64) -> usize {
    ((base as f64 * factor).round() as usize).max(1)
}

impl ExperimentConfig {
    /// Defaults for everything but the input dimension.
    pub fn new(input_dim: usize) -> Self {
        toml::from_str(&format!("input_dim = {input_dim}")).expect("defaults deserialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Swaps in the desk-scale size factors and caps the replicate count.
    pub fn apply_desk_scale(&mut self) {
        self.size_factors = self.desk_scale.size_factors.clone();
        self.replicates = self.replicates.min(self.desk_scale.replicates);
    }

    pub fn widths(&self) -> Vec<usize> {
        self.size_factors
            .iter()
            .map(|&f| student_width(self.base_hidden_width, f))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let counts = [
            ("input_dim", self.input_dim),
            ("base_hidden_width", self.base_hidden_width),
            ("hidden_layers", self.hidden_layers),
            ("replicates", self.replicates),
            ("samplings", self.samplings),
            ("ablation_draws", self.ablation_draws),
            ("data.train_size", self.data.train_size),
            ("data.validation_size", self.data.validation_size),
            ("data.test_size", self.data.test_size),
            ("data.teacher_max_attempts", self.data.teacher_max_attempts),
            ("training.epochs", self.training.epochs),
            ("training.batch_size", self.training.batch_size),
            ("desk_scale.replicates", self.desk_scale.replicates),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be at least 1"));
        }
        if self.training.validation_interval == Some(0) {
            return bad("training.validation_interval must be at least 1".into());
        }
        for (name, factors) in [("size_factors", &self.size_factors), ("desk_scale.size_factors", &self.desk_scale.size_factors)] {
            if factors.is_empty() {
                return bad(format!("{name} must not be empty"));
            }
            if factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
                return bad(format!("{name} must be positive and finite"));
            }
            if factors.iter().enumerate().any(|(i, a)| factors[..i].contains(a)) {
                return bad(format!("{name} contains duplicates"));
            }
        }
        if self.learning_rates.is_empty() || self.learning_rates.iter().any(|lr| !(lr.is_finite() && *lr > 0.0)) {
            return bad("learning_rates must be a non-empty list of positive values".into());
        }
        if self.inits.is_empty() || self.optimizers.is_empty() {
            return bad("inits and optimizers must each list at least one entry".into());
        }
        for init in &self.inits {
            init.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        for opt in &self.optimizers {
            opt.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold < 1.0) {
            return bad("similarity_threshold must lie in (0, 1)".into());
        }
        if self.unit_cap < 2 {
            return bad("unit_cap must be at least 2".into());
        }
        validate_grid(&self.ablation_grid).map_err(|e| Error::Config(format!("ablation_grid: {e}")))?;
        if self.ablation_grid.len() < 2 {
            return bad("ablation_grid needs at least 2 points".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_toml("input_dim = 10").unwrap();
        assert_eq!(c.size_factors, DEFAULT_SIZE_FACTORS);
        assert_eq!(c.widths(), vec![32, 64, 128, 256, 512]);
        assert_eq!(c.replicates, 3);
        assert_eq!(c.ablation_grid.len(), 20);
        assert_eq!(c.training.train_spec(5).validation_interval, 50);
        assert_eq!(c, ExperimentConfig::new(10));
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = ExperimentConfig::new(10);
        c.inits.push(InitSpec::fixed_sigma(1.0));
        c.optimizers.push(OptimizerKind::adam());
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn integer_factors_and_tables() {
        let c = ExperimentConfig::from_toml(
            r#"
            input_dim = 4
            size_factors = [1, 2, 0.5]
            [[inits]]
            family = "he"
            distribution = "uniform"
            [[optimizers]]
            kind = "sgd"
            "#,
        )
        .unwrap();
        assert_eq!(c.size_factors, vec![1.0, 2.0, 0.5]);
        assert_eq!(c.optimizers, vec![OptimizerKind::Sgd]);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "input_dim = 10\nsize_factor = [1]",
            "input_dim = 0",
            "input_dim = 10\nsize_factors = [0]",
            "input_dim = 10\nsize_factors = [1, 1]",
            "input_dim = 10\nreplicates = 0",
            "input_dim = 10\nsimilarity_threshold = 1.0",
            "input_dim = 10\nablation_grid = [0.1, 0.2]",
            "input_dim = 10\nlearning_rates = []",
            "input_dim = 10\n[training]\nepochs = 0",
            "input_dim = 10\n[[inits]]\nfamily = \"fixed_sigma\"\ndistribution = \"normal\"",
        ] {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn desk_scale() {
        let mut c = ExperimentConfig::new(10_000);
        c.apply_desk_scale();
        assert_eq!(c.size_factors, DESK_SCALE_SIZE_FACTORS);
        assert_eq!(c.replicates, 1);
    }

    #[test]
    fn width_rounding() {
        assert_eq!(student_width(128, 0.25), 32);
        assert_eq!(student_width(3, 0.1), 1);
        assert_eq!(student_width(10, 0.25), 3);
    }
}
