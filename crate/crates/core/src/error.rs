use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("row {0} has a level outside its declared range")]
    OutOfRangeLevel(usize),
    #[error("z level {0} is never observed")]
    EmptyStratum(usize),
    #[error("invalid level configuration: {0}")]
    InvalidLevels(String),
    #[error("response space of {size} components exceeds the ceiling of {ceiling}")]
    CeilingExceeded { size: u128, ceiling: u64 },
    #[error("operation requires binary z, x and y")]
    NotBinary,
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sampling constraint could not be satisfied: {0}")]
    ConstraintUnsatisfiable(String),
    #[error("evidence estimator diverged: {0}")]
    EstimatorDiverged(String),
    #[error("polytope test inconclusive, residual {residual:e}")]
    Inconclusive { residual: f64 },
    #[error("probability {value} for {what} lies outside [0, 1]")]
    InvalidProbability { what: String, value: f64 },
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("cannot parse row {row}, column {column:?}")]
    ParseError { row: usize, column: String },
    #[error("column {0:?} is not binary")]
    NotBinaryColumn(String),
    #[error("column {0:?} is constant")]
    DegenerateColumn(String),
    #[error("covariate matrix is rank deficient")]
    RankDeficient,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the evidence estimators rather than of the input.
    pub fn is_estimator_failure(&self) -> bool {
        matches!(self, Error::EstimatorDiverged(_) | Error::Inconclusive { .. })
    }
}
