use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix U({0}) is not skew-symmetric")]
    NotSkewSymmetric(usize),
    #[error("the structure matrices are linearly dependent")]
    LinearlyDependent,
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("dilation factor must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("symmetric eigensolver did not converge")]
    EigenFailure,
    #[error("argument {value} at index {index} outside kernel domain (limit {limit})")]
    DomainViolation { index: usize, value: f64, limit: f64 },
    #[error("root finding failed to converge: {0}")]
    ConvergenceFailure(String),
    #[error("Bessel level {0} exceeds the supported maximum")]
    LevelTooLarge(usize),
    #[error("maximum iteration count reached in {0}")]
    MaxIter(&'static str),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("theta is singular: U(theta) has an eigenvalue at a nonzero multiple of pi")]
    SingularTheta,
    #[error("no solution found")]
    NoneFound,
    #[error("quadrature did not converge (estimate {estimate}, error {error})")]
    Unconverged { estimate: f64, error: f64 },
    #[error("unsupported vertical dimension m = {0}")]
    UnsupportedDimension(usize),
    #[error("point has no interior nondegenerate maximizer")]
    NotInM,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
