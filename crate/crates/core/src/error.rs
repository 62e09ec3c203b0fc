use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("coordinate {value} of parameter `{name}` (mode {mode}) is outside [{lower}, {upper}]")]
    OutOfDomain {
        mode: usize,
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("unknown category `{label}` for parameter `{name}`")]
    UnknownCategory { name: String, label: String },

    #[error("configuration has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("no in-domain observations ({rejected} rows rejected)")]
    EmptyTensor { rejected: usize },

    #[error("fit failed at sweep {sweep}: {reason}")]
    FitFailure { sweep: usize, reason: String },

    #[error("factor entry {value} is not strictly positive (mode {mode}, row {row})")]
    NonPositiveFactor {
        mode: usize,
        row: usize,
        value: f64,
    },

    #[error("power iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("extrapolation requires logq2 (log-ratio-positive) models")]
    ExtrapolationRegime,

    #[error("no extrapolation model for parameter `{0}`; build one with build_extrapolation")]
    MissingExtrapolation(String),

    #[error("parameter `{0}` is categorical and cannot be extrapolated")]
    CategoricalExtrapolation(String),

    #[error("non-positive value {value} at position {index}")]
    NonPositiveValue { index: usize, value: f64 },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("spline fit needs at least 2 strictly increasing abscissae")]
    SplineInput,

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("unsupported model file version {0}")]
    Version(u32),

    #[error("io: {0}")]
    Io(String),

    #[error("{0}")]
    Invalid(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
