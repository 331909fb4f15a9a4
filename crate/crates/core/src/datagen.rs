//! Teacher–student synthetic data: a random quarter-width ReLU teacher labels
//! i.i.d. standard-normal inputs.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{build_mlp, labels_of, InitSpec, Mlp};
use crate::numerics::{DenseMatrix, SeededRng, RNG_ALGORITHM};

/// Hidden width of the teacher: a quarter of the 128-unit reference student.
pub const TEACHER_HIDDEN_WIDTH: usize = 32;
pub const TEACHER_SIGMA: f64 = 0.01;
/// Inputs drawn to measure a teacher's label balance.
pub const PROBE_SIZE: usize = 10_000;
/// Accepted range for the fraction of label 1 on the probe.
pub const TEACHER_BALANCE: (f64, f64) = (0.40, 0.60);
/// Relaxed range re-checked on each emitted dataset (small-sample jitter).
pub const DATASET_BALANCE: (f64, f64) = (0.35, 0.65);

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub inputs: DenseMatrix,
    pub labels: Vec<usize>,
    pub teacher_seed: u64,
    pub data_seed: u64,
    /// Fraction of rows labelled 1.
    pub balance: f64,
}

/// A teacher that passed the balance probe.
#[derive(Clone, Debug)]
pub struct Teacher {
    pub net: Mlp,
    /// Seed of the attempt that produced this teacher.
    pub seed: u64,
    pub probe_balance: f64,
    pub attempts: usize,
}

/// Random `input_dim → 32 → 2` teacher with σ = 0.01 normal weights.
pub fn make_teacher(input_dim: usize, rng: &mut SeededRng) -> Result<Mlp> {
    build_mlp(
        input_dim,
        &[TEACHER_HIDDEN_WIDTH],
        2,
        &InitSpec::fixed_sigma(TEACHER_SIGMA),
        rng,
    )
}

pub fn balance_acceptable(balance: f64) -> bool {
    (TEACHER_BALANCE.0..=TEACHER_BALANCE.1).contains(&balance)
}

fn fraction_of_ones(labels: &[usize]) -> f64 {
    labels.iter().filter(|&&l| l == 1).count() as f64 / labels.len() as f64
}

fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.standard_normal()).collect();
    DenseMatrix::new(rows, cols, data).expect("normal draws are finite")
}

/// Fraction of label 1 over `PROBE_SIZE` fresh standard-normal inputs.
pub fn probe_balance(teacher: &Mlp, rng: &mut SeededRng) -> Result<f64> {
    // Chunked so 10,000-dimensional probes stay small in memory.
    let mut ones = 0usize;
    let mut remaining = PROBE_SIZE;
    while remaining > 0 {
        let rows = remaining.min(1_000);
        let x = standard_normal_matrix(rows, teacher.input_dim(), rng);
        let labels = labels_of(&teacher.forward_batch(&x, None)?);
        ones += labels.iter().filter(|&&l| l == 1).count();
        remaining -= rows;
    }
    Ok(ones as f64 / PROBE_SIZE as f64)
}

/// Draws teachers from `source` until one has probe balance within
/// `TEACHER_BALANCE`. Attempt `i` uses seed `rng.child("teacher-attempt", i)`.
pub fn find_teacher_with<F>(rng: &SeededRng, max_attempts: usize, mut source: F) -> Result<Teacher>
where
    F: FnMut(&mut SeededRng) -> Result<Mlp>,
{
    let mut last_balance = f64::NAN;
    for attempt in 0..max_attempts {
        let mut attempt_rng = rng.child("teacher-attempt", attempt as u64);
        let seed = attempt_rng.base_seed();
        let net = source(&mut attempt_rng)?;
        let mut probe_rng = attempt_rng.child("probe", 0);
        let balance = probe_balance(&net, &mut probe_rng)?;
        if balance_acceptable(balance) {
            return Ok(Teacher {
                net,
                seed,
                probe_balance: balance,
                attempts: attempt + 1,
            });
        }
        last_balance = balance;
    }
    Err(Error::TeacherSearchFailed {
        attempts: max_attempts,
        last_balance,
    })
}

pub fn find_teacher(input_dim: usize, rng: &SeededRng, max_attempts: usize) -> Result<Teacher> {
    find_teacher_with(rng, max_attempts, |r| make_teacher(input_dim, r))
}

/// `n` standard-normal inputs labelled by `teacher`.
pub fn generate(teacher: &Teacher, n: usize, data_seed: u64) -> Result<SyntheticDataset> {
    if n == 0 {
        return Err(Error::invalid("dataset size must be at least 1"));
    }
    let mut rng = SeededRng::new(data_seed);
    let inputs = standard_normal_matrix(n, teacher.net.input_dim(), &mut rng);
    let labels = labels_of(&teacher.net.forward_batch(&inputs, None)?);
    let balance = fraction_of_ones(&labels);
    if !(DATASET_BALANCE.0..=DATASET_BALANCE.1).contains(&balance) {
        return Err(Error::Imbalanced {
            balance,
            low: DATASET_BALANCE.0,
            high: DATASET_BALANCE.1,
        });
    }
    Ok(SyntheticDataset {
        inputs,
        labels,
        teacher_seed: teacher.seed,
        data_seed,
        balance,
    })
}

/// Teacher search followed by dataset generation.
pub fn generate_with_search(
    input_dim: usize,
    n: usize,
    teacher_rng: &SeededRng,
    data_seed: u64,
    max_attempts: usize,
) -> Result<(Teacher, SyntheticDataset)> {
    let teacher = find_teacher(input_dim, teacher_rng, max_attempts)?;
    let data = generate(&teacher, n, data_seed)?;
    Ok((teacher, data))
}

impl SyntheticDataset {
    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn examples(&self) -> crate::training::Examples<'_> {
        crate::training::Examples {
            inputs: &self.inputs,
            labels: &self.labels,
        }
    }

    /// CSV with header `x0,…,x{d-1},label`; floats in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.input_dim()).map(|i| format!("x{i}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.input_dim() + 1);
        for (r, label) in self.labels.iter().enumerate() {
            record.clear();
            record.extend(self.inputs.row(r).iter().map(|v| v.to_string()));
            record.push(label.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn metadata(&self, role: &str, teacher: &Teacher) -> DatasetMetadata {
        DatasetMetadata {
            role: role.to_string(),
            rows: self.len(),
            input_dim: self.input_dim(),
            balance: self.balance,
            teacher_seed: teacher.seed,
            teacher_probe_balance: teacher.probe_balance,
            teacher_attempts: teacher.attempts,
            data_seed: self.data_seed,
            rng_algorithm: RNG_ALGORITHM.to_string(),
        }
    }
}

/// Companion document written next to each dataset CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub role: String,
    pub rows: usize,
    pub input_dim: usize,
    pub balance: f64,
    pub teacher_seed: u64,
    pub teacher_probe_balance: f64,
    pub teacher_attempts: usize,
    pub data_seed: u64,
    pub rng_algorithm: String,
}

/// Reads a dataset CSV written by [`SyntheticDataset::write_csv`].
pub fn read_csv(path: &Path) -> Result<(DenseMatrix, Vec<usize>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let cols = reader.headers()?.len();
    if cols < 2 {
        return Err(Error::Malformed {
            what: "dataset csv",
            detail: "need at least one input column and a label column".into(),
        });
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse_err = |detail: String| Error::Malformed {
            what: "dataset csv",
            detail: format!("row {}: {detail}", line + 1),
        };
        for field in record.iter().take(cols - 1) {
            data.push(field.parse::<f64>().map_err(|e| parse_err(e.to_string()))?);
        }
        let label = record.get(cols - 1).unwrap_or_default();
        labels.push(label.parse::<usize>().map_err(|e| parse_err(e.to_string()))?);
    }
    let inputs = DenseMatrix::new(labels.len(), cols - 1, data)?;
    Ok((inputs, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::LayerParams;

    #[test]
    fn teacher_shapes() {
        let t = make_teacher(10, &mut SeededRng::new(1)).unwrap();
        assert_eq!((t.input_dim(), t.hidden_widths(), t.output_dim()), (10, vec![32], 2));
        let big = make_teacher(10_000, &mut SeededRng::new(1)).unwrap();
        assert_eq!((big.input_dim(), big.hidden_widths(), big.output_dim()), (10_000, vec![32], 2));
        let again = make_teacher(10, &mut SeededRng::new(1)).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn balance_bounds() {
        assert!(!balance_acceptable(0.30));
        assert!(balance_acceptable(0.50));
        assert!(balance_acceptable(0.40));
        assert!(balance_acceptable(0.60));
        assert!(!balance_acceptable(0.61));
    }

    fn constant_teacher() -> Mlp {
        Mlp::new(vec![LayerParams::zeros(4, 3), LayerParams::zeros(2, 4)]).unwrap()
    }

    #[test]
    fn unbalanced_teachers_are_rejected() {
        let rng = SeededRng::new(5);
        let mut calls = 0;
        let teacher = find_teacher_with(&rng, 10, |r| {
            calls += 1;
            if calls <= 2 {
                Ok(constant_teacher())
            } else {
                make_teacher(3, r)
            }
        });
        // Some random teacher must eventually pass; the constant ones cannot.
        let teacher = teacher.unwrap();
        assert!(teacher.attempts >= 3);
        assert!(balance_acceptable(teacher.probe_balance));
    }

    #[test]
    fn exhausted_search_reports_last_balance() {
        let err = find_teacher_with(&SeededRng::new(1), 3, |_| Ok(constant_teacher())).unwrap_err();
        match err {
            Error::TeacherSearchFailed { attempts, last_balance } => {
                assert_eq!(attempts, 3);
                assert_eq!(last_balance, 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn generated_dataset_shape_and_balance() {
        let (teacher, data) = generate_with_search(10, 1000, &SeededRng::new(2), 77, 100).unwrap();
        assert_eq!(data.len(), 1000);
        assert_eq!(data.input_dim(), 10);
        assert!((0.35..=0.65).contains(&data.balance));
        assert_eq!(data.teacher_seed, teacher.seed);
        assert!(generate(&teacher, 0, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let (_, data) = generate_with_search(4, 50, &SeededRng::new(3), 5, 100).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        data.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
        let (x, y) = read_csv(&path).unwrap();
        assert_eq!(x, data.inputs);
        assert_eq!(y, data.labels);
    }
}
