//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong between raw CSV input and written results.
#[derive(Debug, Error)]
pub enum Error {
    /// Structural problems in input files: missing columns, mismatched
    /// plant ids, duplicate ids, inconsistent series lengths.
    #[error("dataset: {0}")]
    Dataset(String),

    /// A value is outside its documented domain (outputs outside [0, 1],
    /// non-positive demand, bad coordinates, bad parameters).
    #[error("validation: {0}")]
    Validation(String),

    /// Timestamps are not a gap-free hourly sequence.
    #[error("time series gap: {0}")]
    Gap(String),

    /// A series has zero variance where a correlation is required.
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    /// A plant is unusable for model assembly (zero capacity factor).
    #[error("degenerate plant: {0}")]
    DegeneratePlant(String),

    /// A portfolio has no generation, so shares are undefined.
    #[error("degenerate portfolio: {0}")]
    DegeneratePortfolio(String),

    /// No capacity scale can satisfy the requested risk target.
    #[error("infeasible risk target: {0}")]
    InfeasibleRisk(String),

    /// Bad run configuration (unknown scenario kind, parameters out of
    /// range, mismatched run directories in a comparison).
    #[error("config: {0}")]
    Config(String),

    /// The optimizer could not produce a usable solution.
    #[error("solver: {0}")]
    Solver(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the command-line frontend maps this error to.
    ///
    /// Input problems (bad config, bad data files) exit with 2, runtime
    /// failures (solves, I/O while writing results) with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Dataset(_)
            | Error::Validation(_)
            | Error::Gap(_)
            | Error::DegenerateSeries(_)
            | Error::DegeneratePlant(_)
            | Error::Config(_) => 2,
            _ => 1,
        }
    }
}
