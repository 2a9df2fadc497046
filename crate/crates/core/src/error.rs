use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Resource,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("incompatible operator spaces: N = {left} vs N = {right}")]
    IncompatibleSpace { left: usize, right: usize },

    #[error("operator has mixed fermion parity; split it before applying the jump-operator sum")]
    MixedParity,

    #[error("initial vector must have unit norm, got {norm}")]
    NotNormalized { norm: f64 },

    #[error("superoperator is not Hermitian: asymmetry {asymmetry:.3e} at step {step}")]
    NotHermitian { step: usize, asymmetry: f64 },

    #[error("fit window too small: {points} points, need at least {required}")]
    FitWindow { points: usize, required: usize },

    #[error("tail is not monotone over the fit window (first violation at n = {n})")]
    NonMonotoneTail { n: usize },

    #[error("moment recursion degenerate: division by zero at (n, k) = ({n}, {k})")]
    MomentDegeneracy { n: usize, k: usize },

    #[error("not enough data: need {needed}, have {have}")]
    Insufficient { needed: usize, have: usize },

    #[error(
        "chain truncation contaminated at t = {t:.4}: |phi_ntrunc|/max = {spill:.3e} with n_trunc = {n_trunc}; increase n_trunc"
    )]
    Truncation { t: f64, spill: f64, n_trunc: usize },

    #[error("norm underflow: Z = {z:e}; rescale and retry")]
    Underflow { z: f64 },

    #[error("tree budget exceeded: {trees} distinct trees, reached generation {achieved}")]
    TreeBudget { trees: usize, achieved: usize },

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("undefined saturation: chi_mu = 0 has no finite tail width")]
    UndefinedSaturation,

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("state is not normalized: norm^2 = {norm_sq}")]
    Unnormalized { norm_sq: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidModel(_)
            | Error::IncompatibleSpace { .. }
            | Error::MixedParity
            | Error::NotNormalized { .. }
            | Error::FitWindow { .. }
            | Error::Insufficient { .. }
            | Error::UndefinedSaturation
            | Error::Unnormalized { .. } => ErrorKind::Validation,
            Error::TreeBudget { .. } | Error::ResourceGuard(_) | Error::Io(_) | Error::Json(_) => {
                ErrorKind::Resource
            }
            Error::NotHermitian { .. }
            | Error::NonMonotoneTail { .. }
            | Error::MomentDegeneracy { .. }
            | Error::Truncation { .. }
            | Error::Underflow { .. }
            | Error::Integrator(_) => ErrorKind::Numerical,
        }
    }
}
