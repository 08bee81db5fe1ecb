use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The coefficient matrix has an eigenvalue below `-1e-10 * max`.
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:e}, max {max_eig:e}")]
    PsdViolation { min_eig: f64, max_eig: f64 },

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("state is not normalized (norm {0})")]
    Unnormalized(f64),

    #[error("coefficient matrix has a negative entry {value} at ({row}, {col})")]
    NegativeEntries { row: usize, col: usize, value: f64 },

    #[error("spectral exponent p = {p} is outside the cutoff-independent window for {pulses} pulse(s)")]
    UnsupportedExponent { p: f64, pulses: usize },

    #[error("dephasing coefficient diverges at p = {0}")]
    Pole(f64),

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("time step {dt} too coarse, need dt <= {max_dt}")]
    StepTooCoarse { dt: f64, max_dt: f64 },

    #[error("frequency grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("information matrix is asymmetric (deviation {0:e}); inconsistent inputs")]
    AsymmetricInformation(f64),

    #[error("negative eigenvalue {0:e} in density matrix")]
    NegativeEigenvalue(f64),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
