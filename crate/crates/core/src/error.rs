use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Closed error taxonomy shared by every estimator and the CLI.
///
/// Each variant maps to a stable string code (see [`Error::code`]) and to a
/// process exit status: input problems exit with 2, estimator failures with 1.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no variation: {0}")]
    NoVariation(String),
    #[error("singular design matrix (smallest singular value {smallest_singular_value:e})")]
    SingularDesign { smallest_singular_value: f64 },
    #[error("ties present among outcomes; the reference-group identity requires distinct values")]
    TiesPresent,
    #[error("overlap violation: propensity {value} at unit {index} outside [{c}, {}]", 1.0 - c)]
    OverlapViolation { index: usize, value: f64, c: f64 },
    #[error("first stage is {first_stage}; instrument must shift treatment upward")]
    WeakOrWrongSignedFirstStage { first_stage: f64 },
    #[error("insufficient cells: {0}")]
    InsufficientCells(String),
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),
    #[error("insufficient local data: {0}")]
    InsufficientLocalData(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("parse error at row {row}, column `{column}`: {message}")]
    ParseError {
        row: usize,
        column: String,
        message: String,
    },
    #[error("column `{column}` must be binary 0/1 (row {row} has {value})")]
    NonBinaryColumn {
        column: String,
        row: usize,
        value: f64,
    },
    #[error("io error: {0}")]
    Io(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::NoVariation(_) => "NoVariation",
            Error::SingularDesign { .. } => "SingularDesign",
            Error::TiesPresent => "TiesPresent",
            Error::OverlapViolation { .. } => "OverlapViolation",
            Error::WeakOrWrongSignedFirstStage { .. } => "WeakOrWrongSignedFirstStage",
            Error::InsufficientCells(_) => "InsufficientCells",
            Error::DegenerateDistribution(_) => "DegenerateDistribution",
            Error::InsufficientLocalData(_) => "InsufficientLocalData",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::MissingColumn(_) => "MissingColumn",
            Error::ParseError { .. } => "ParseError",
            Error::NonBinaryColumn { .. } => "NonBinaryColumn",
            Error::Io(_) => "Io",
            Error::Config(_) => "Config",
        }
    }

    /// 2 for problems with the input or configuration, 1 for estimator failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::InvalidSpec(_)
            | Error::MissingColumn(_)
            | Error::ParseError { .. }
            | Error::NonBinaryColumn { .. }
            | Error::Io(_)
            | Error::Config(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
