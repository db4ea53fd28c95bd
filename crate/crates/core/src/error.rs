use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("result of size {rows}x{cols} exceeds the configured maximum of {max} entries")]
    DimensionOverflow { rows: usize, cols: usize, max: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("eigendecomposition did not converge")]
    EigenFailure,

    #[error("2π/ħ = {0} is not an integer; the torus cannot be quantized")]
    NonIntegerTorus(f64),

    #[error("momentum {0} is not on the momentum grid")]
    OffGridMomentum(f64),

    #[error("spin coupling requires equal j (got 2j = {0} and 2j = {1})")]
    MismatchedSpin(u32, u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("decay fit failed: {0}")]
    FitFailure(String),

    #[error("empty production-rate window: lower bound t = {lower}, upper bound t = {upper}")]
    EmptyWindow { lower: usize, upper: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
