//! Matrix arithmetic, seeded randomness and the statistical primitives
//! shared by every analysis.

mod matrix;
mod rng;
mod stats;

pub use matrix::DenseMatrix;
pub(crate) use matrix::{gemm_nn, gemm_nt, gemm_tn};
pub use rng::{derive_seed, SeededRng, RNG_ALGORITHM};
pub use stats::{
    auc_trapezoid, average_ranks, is_constant, mean, pearson_abs, sample_std,
    sample_without_replacement, spearman, Curve,
};
