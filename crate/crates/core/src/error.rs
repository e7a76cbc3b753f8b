use thiserror::Error;

/// Errors raised anywhere in the proxy / downstream pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("sensitive column `{column}` has non-binary value `{value}` on row {row}")]
    NonBinarySensitive { row: usize, column: String, value: String },

    #[error("label column `{column}` has non-binary value `{value}` on row {row}")]
    NonBinaryLabel { row: usize, column: String, value: String },

    #[error("cannot parse `{value}` in column `{column}` on row {row}")]
    UnparseableCell { row: usize, column: String, value: String },

    #[error("unknown code `{code}` in column `{column}`")]
    UnknownCode { column: String, code: String },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("split of {n} rows at fraction {fraction} leaves an empty half")]
    DegenerateSplit { n: usize, fraction: f64 },

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("group {0} has zero mass")]
    EmptyGroup(usize),

    #[error("proxy for group {group} has total weight {total:e}, below the degeneracy threshold")]
    DegenerateProxy { group: usize, total: f64 },

    #[error("input `{0}` must be positive")]
    NonPositiveInput(&'static str),

    #[error("training diverged: loss {loss:e} at round {round}")]
    NonFiniteLoss { round: usize, loss: f64 },

    #[error("theoretical schedule needs {required} oracle calls but the budget is {budget}; set explicit round/draw overrides")]
    ConfigOverflow { required: f64, budget: u64 },

    #[error("function class has {0} rules; at most 64 are supported")]
    FTooLarge(usize),

    #[error("weighted binary transform requires M = 1, got {0}")]
    MOutOfRange(f64),

    #[error("dual variable became non-finite at round {0}")]
    NonFiniteDual(usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("no results found in {0}")]
    NoResults(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

/// Coarse error classes used for process exit codes and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFamily {
    Config,
    Data,
    Training,
}

impl ErrorFamily {
    pub fn name(self) -> &'static str {
        match self {
            Self::Config => "config",
            Self::Data => "data",
            Self::Training => "training",
        }
    }
}

impl Error {
    pub fn family(&self) -> ErrorFamily {
        match self {
            Error::Config(_)
            | Error::ConfigOverflow { .. }
            | Error::FTooLarge(_)
            | Error::MOutOfRange(_)
            | Error::NonPositiveInput(_) => ErrorFamily::Config,
            Error::NonFiniteLoss { .. } | Error::NonFiniteDual(_) | Error::DegenerateProxy { .. } => {
                ErrorFamily::Training
            }
            _ => ErrorFamily::Data,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Malformed(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Malformed(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
