use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    #[error("singular metric: {0}")]
    SingularMetric(String),

    #[error("metric is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("infinite directional derivative: {0}")]
    InfiniteDerivative(String),

    #[error("point outside the effective domain: {0}")]
    OutOfDomain(String),

    #[error("numeric directional derivative did not converge: {0}")]
    NonConvergent(String),

    #[error("ill-posed argmin: {0}")]
    IllPosed(String),

    #[error("inner solver failed after {iterations} iterations (certified distance {certified:.3e} > tol {tol:.3e})")]
    SolverFailure {
        iterations: usize,
        certified: f64,
        tol: f64,
    },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("proximal condition violated: p_t(x_t) = {at_center} exceeds probe value {probe}")]
    ProximalViolation { at_center: f64, probe: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("extended-real arithmetic undefined: {0}")]
    UndefinedArithmetic(String),

    #[error("schedule condition violated: {0}")]
    ScheduleCondition(String),

    #[error("missing certificate: {0}")]
    MissingCertificate(String),

    #[error("certificate failed: {0}")]
    CertificateFailed(String),

    #[error("bound violated: {0}")]
    BoundViolated(String),

    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable tag used in error JSON and by the C API.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::SingularMetric(_) => "singular_metric",
            Error::NotPsd(_) => "not_psd",
            Error::InfiniteDerivative(_) => "infinite_derivative",
            Error::OutOfDomain(_) => "out_of_domain",
            Error::NonConvergent(_) => "non_convergent",
            Error::IllPosed(_) => "ill_posed",
            Error::SolverFailure { .. } => "solver_failure",
            Error::Unsupported(_) => "unsupported",
            Error::Eigen(_) => "eigen",
            Error::ProximalViolation { .. } => "proximal_violation",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidConfig(_) => "invalid_config",
            Error::UndefinedArithmetic(_) => "undefined_arithmetic",
            Error::ScheduleCondition(_) => "schedule_condition",
            Error::MissingCertificate(_) => "missing_certificate",
            Error::CertificateFailed(_) => "certificate_failed",
            Error::BoundViolated(_) => "bound_violated",
            Error::ReplayMismatch(_) => "replay_mismatch",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidConfig(e.to_string())
    }
}
