use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.6e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("not a Gaussian state: min eigenvalue of 2S + iJ is {min_eigenvalue:.6e}, symmetry defect {symmetry_defect:.3e}")]
    InvalidState {
        min_eigenvalue: f64,
        symmetry_defect: f64,
    },

    #[error("pair (K, C) is not admissible: min eigenvalue of C + i(KᵀJ + JK) is {min_eigenvalue:.6e}")]
    Inadmissible { min_eigenvalue: f64 },

    #[error("matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("Fock dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("truncation leakage {population:.3e} exceeds {threshold:.1e}")]
    Leakage { population: f64, threshold: f64 },

    #[error("master-equation integration unstable: {0}")]
    Unstable(String),

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
