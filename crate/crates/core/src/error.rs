use crate::profiles::AdmissibilityCertificate;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("phi'(r) phi''(r) <= 0 at r = {r}")]
    SignViolation {
        r: f64,
        certificate: Box<AdmissibilityCertificate>,
    },
    #[error("phi' or phi'' vanishes at r = {0}")]
    DegenerateDerivative(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("r = {0} lies outside [1/2, 2]")]
    DomainError(f64),
    #[error("xi' = 0 has no rotated frame")]
    ZeroFrequency,
    #[error("quadrature budget exceeded: {requested} panels requested, cap {cap}")]
    BudgetExceeded { requested: u64, cap: u64 },
    #[error("dyadic tail does not converge (beta <= 2 alpha)")]
    NonconvergentTail,
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("multiplier cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
