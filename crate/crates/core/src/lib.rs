//! Removable and repeated unit analysis for small fully connected networks.
//!
//! Students are trained on labels from a random quarter-width teacher; the
//! trained networks are then probed for two capacity-constraining features:
//!
//! - **removability**: how many test labels survive random ablation of a
//!   fraction of a layer's units ([`removability`]);
//! - **repetition**: how many units in a layer have strongly correlated
//!   activations ([`repetition`]).
//!
//! [`constructions`] holds exact transformations that double a network's last
//! hidden layer without changing its labels while adding removable units,
//! repeated units, or both. [`runner`] drives size-factor sweeps and writes
//! deterministic CSV outputs.

pub mod constructions;
pub mod datagen;
pub mod error;
pub mod mlp;
pub mod numerics;
pub mod removability;
pub mod repetition;
pub mod runner;
pub mod training;

pub use error::{Error, Result};
