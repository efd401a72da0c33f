//! Honest causal forests for multiple-treatment uplift modeling.
//!
//! The crate covers the full path from raw campaign data to a decile-level
//! evaluation report:
//!
//! * [`data`] — typed datasets, CSV ingestion, one-hot encoding, the e-mail
//!   campaign loader, train/test partitioning, and per-arm subsetting.
//! * [`regression`] — honest regression forests used for nuisance estimation
//!   (outcome and propensity surfaces) with out-of-bag prediction.
//! * [`causal`] — local centering, the gradient-based causal split rule,
//!   forest-weighted treatment-effect prediction, and variable importance.
//! * [`multi`] — orchestration of K binary forests (one per treatment arm
//!   against shared control) or a single binarized forest, plus per-unit
//!   treatment recommendation.
//! * [`eval`] — decile evaluation boards, incremental cumulative revenue
//!   curves, revenue-vs-conversion comparison, and the end-to-end experiment
//!   runner that produces a serializable report.
//! * [`synthetic`] — configurable generators with known ground-truth effects
//!   for calibration and testing.
//!
//! Everything is deterministic given a seed: per-tree and per-node RNG streams
//! are derived with a splitmix-style mixer, so results are identical whether
//! the crate runs on the rayon thread pool (default `parallel` feature) or on
//! the sequential fallback.

pub mod causal;
pub mod data;
pub mod error;
pub mod eval;
mod matrix;
pub mod multi;
pub mod parallel;
pub mod regression;
mod rng;
pub mod synthetic;
mod tree;

pub use error::{Error, Result};
pub use matrix::Matrix;
