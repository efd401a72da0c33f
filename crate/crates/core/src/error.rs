//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the engine.
///
/// Variants are grouped roughly by pipeline stage; the CLI maps them onto its
/// exit-code contract (input/config problems, model-compatibility problems,
/// and estimation/evaluation failures are distinguishable).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A declared column is missing, duplicated, or otherwise unusable.
    #[error("schema error: {0}")]
    Schema(String),

    /// A cell failed to parse; `row` is the 1-based data row.
    #[error("parse error at row {row}, column {column}: {msg}")]
    Parse {
        row: usize,
        column: String,
        msg: String,
    },

    /// Treatment labeling problems (unknown label, missing control, ...).
    #[error("treatment labeling error: {0}")]
    Labeling(String),

    /// Invalid dataset shape or content (length mismatch, NaN, bad outcome).
    #[error("invalid dataset: {0}")]
    Dataset(String),

    /// Partitioning parameters that cannot produce usable folds.
    #[error("partition sizing error: {0}")]
    Sizing(String),

    /// A derived per-arm or binarized dataset would be degenerate.
    #[error("arm composition error: {0}")]
    Composition(String),

    /// Invalid forest or experiment configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Matrix/vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An operation's input contract was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Propensity overlap failure: too many units needed clamping.
    #[error("overlap violation: {0}")]
    Overlap(String),

    /// Degenerate estimation state (e.g. zero treatment variation).
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Evaluation-stage failures (empty test sets, length mismatches, ...).
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A persisted model cannot be applied to the given data.
    #[error("incompatible model: {0}")]
    Compatibility(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
