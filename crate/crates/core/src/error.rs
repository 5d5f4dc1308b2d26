use alloc::string::String;

/// Failures raised by the numerical layer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("vector length {0} is not a perfect square")]
    NotPerfectSquare(usize),
    #[error("factor index {index} out of range for {factors} factors")]
    FactorOutOfRange { index: usize, factors: usize },
    #[error("operator is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("negative eigenvalue {value:e} beyond tolerance")]
    NegativeEigenvalue { value: f64 },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid bath: {0}")]
    InvalidBath(String),
    #[error("occupation requires omega > 0, got {0}")]
    NonPositiveFrequency(f64),
    #[error("quadrature did not converge: error estimate {achieved:e} above requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("counting field has {found} bath entries, expected {expected}")]
    CountingFields { expected: usize, found: usize },
    #[error("couplings are not time-reversal even")]
    TimeReversalOdd,
    #[error("kernel of the generator has dimension {dimension}")]
    DegenerateKernel { dimension: usize },
    #[error("finite-difference step {0:e} underflows")]
    StepUnderflow(f64),
    #[error("state is rank deficient beyond clamping")]
    RankDeficient,
    #[error("composite dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("exact model requires real couplings")]
    NonRealCoupling,
    #[error("eigendecomposition failed")]
    Eigen,
}

pub type Result<T> = core::result::Result<T, Error>;
