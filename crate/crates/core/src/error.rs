use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants split into two families: validation problems with the inputs
/// (shapes, files, parameters) and numerical failures raised by the solvers.
/// [`Error::is_numerical`] tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    // linear algebra
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive semi-definite (smallest eigenvalue {0:.3e})")]
    NotPositiveSemidefinite(f64),
    #[error("all eigenvalues fall below the truncation threshold")]
    AllTruncated,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    // dataset / config / io
    #[error("missing cell: unit '{unit}', feature '{feature}', time {time}, variable {variable}")]
    MissingCell {
        unit: String,
        feature: String,
        time: usize,
        variable: usize,
    },
    #[error("duplicate cell on line {line}: unit '{unit}', feature '{feature}', time {time}, variable {variable}")]
    DuplicateCell {
        line: usize,
        unit: String,
        feature: String,
        time: usize,
        variable: usize,
    },
    #[error("line {line}: column '{column}' has non-numeric value '{value}'")]
    NonNumericValue {
        line: usize,
        column: String,
        value: String,
    },
    #[error("feature '{feature}' has a different variable set for unit '{unit}'")]
    InconsistentShape { feature: String, unit: String },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("invalid value '{value}' for '{key}': {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed report {path}: {message}")]
    MalformedReport { path: PathBuf, message: String },

    // kernel method
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("median pairwise squared distance is zero; cannot pick a kernel width")]
    DegenerateDistances,
    #[error("retained rank {rank} is smaller than the {requested} requested components")]
    InsufficientRank { rank: usize, requested: usize },
    #[error("component index {index} out of range (have {count})")]
    InvalidComponentIndex { index: usize, count: usize },

    // functional method
    #[error("basis size {0} must be odd and at least 1")]
    EvenBasisSize(usize),
    #[error("t = {0} lies outside [0, 1]")]
    OutOfInterval(f64),
    #[error("underdetermined fit: T = {t} time points is less than basis size B = {b}")]
    UnderdeterminedFit { t: usize, b: usize },
    #[error("singular design: basis Gram condition number {0:.3e} exceeds 1e12")]
    SingularDesign(f64),
    #[error("need at least 2 units, got {0}")]
    InsufficientUnits(usize),
    #[error("variable index {index} out of range (feature has {count})")]
    InvalidVariableIndex { index: usize, count: usize },

    // clusterability
    #[error("probe count m = {m} must be smaller than the point count n = {n}")]
    TooManyProbes { m: usize, n: usize },
    #[error("sampling region has zero volume (coordinate {0} is constant)")]
    DegenerateRegion(usize),
    #[error("{0} is out of range")]
    OutOfRange(String),

    // oracle
    #[error("sample covariance is singular")]
    SingularCovariance,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NotSymmetric(_)
                | Error::NotPositiveSemidefinite(_)
                | Error::AllTruncated
                | Error::DegenerateDistances
                | Error::InsufficientRank { .. }
                | Error::SingularDesign(_)
                | Error::SingularCovariance
                | Error::DegenerateRegion(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
