use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("lattice of {requested} sites exceeds the configured maximum of {max}")]
    Capacity { requested: usize, max: usize },
    #[error("site index {index} out of range for {sites} sites")]
    IndexOutOfRange { index: usize, sites: usize },
    #[error("excitation number {n} out of range for {sites} sites")]
    ExcitationOutOfRange { n: usize, sites: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("subset catalog yields a rank-deficient (V, A) design matrix")]
    FitDegeneracy,
    #[error("operator is not hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("iterative solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("eigenpairs fail the accuracy check (residual {residual:e}, orthonormality {orthonormality:e})")]
    Inaccurate { residual: f64, orthonormality: f64 },
    #[error("no correlation above the fit floor at distances 1 and 2")]
    NoSignal,
    #[error("subset of {size} sites exceeds the reduced-density-matrix limit of {max}")]
    SubsetTooLarge { size: usize, max: usize },
    #[error("density matrix trace {trace} deviates from 1")]
    TraceDeviation { trace: f64 },
    #[error("all drive amplitudes vanish (every resonator sits at a standing-wave node)")]
    ZeroDrive,
    #[error("capacitances must be strictly positive")]
    NonPositiveCapacitance,
    #[error("singular matrix")]
    SingularMatrix,
    #[error("division by zero in {0}")]
    ZeroDivisor(&'static str),
    #[error("no eigendecomposition supplied for sector {0}")]
    MissingSector(usize),
    #[error("dense eigensolver failed: {0}")]
    Backend(&'static str),
}
