use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}: cannot parse {value:?} as a real number")]
    Parse { row: usize, value: String },

    #[error("column {0} not found")]
    MissingColumn(String),

    #[error("column {0} contains no observations")]
    EmptyColumn(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: need {needed} observations, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("singular design (reciprocal condition {rcond:.3e}){}", .at.map(|j| format!(" at row {j}")).unwrap_or_default())]
    Singular { rcond: f64, at: Option<usize> },

    #[error("boundary {boundary} undefined at t = {t}")]
    Domain { boundary: String, t: f64 },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("monitoring aborted at k = {k}: {source}")]
    Monitoring {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{failures} of {replications} replications failed to estimate")]
    TooManyFailures { failures: usize, replications: usize },

    #[error("infeasible trimming: {0}")]
    Infeasible(String),
}
