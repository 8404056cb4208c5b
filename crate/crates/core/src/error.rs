use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label {label} is outside [1, 2^{n_spins}]")]
    LabelOutOfRange { label: usize, n_spins: usize },

    #[error("excitation number {n} is outside [0, {n_spins}]")]
    SubspaceOutOfRange { n: usize, n_spins: usize },

    #[error("spin count mismatch: {left} vs {right}")]
    SpinCountMismatch { left: usize, right: usize },

    #[error("unsupported spin count {n_spins}: {reason}")]
    InvalidSpinCount { n_spins: usize, reason: &'static str },

    #[error("spin position {position} is outside [1, {n_spins}]")]
    PositionOutOfRange { position: usize, n_spins: usize },

    #[error("positions must differ, got i = j = {0}")]
    CoincidentPositions(usize),

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid J coupling: {0}")]
    InvalidCoupling(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frequency {frequency} aliases: |f| must be below the Nyquist limit {nyquist}")]
    Aliased { frequency: f64, nyquist: f64 },

    #[error("sampling interval {delta} exceeds the Nyquist bound {bound} (max frequency {max_frequency})")]
    NyquistViolation {
        delta: f64,
        bound: f64,
        max_frequency: f64,
    },

    #[error("at tau index {index}: {source}")]
    AtTau {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("grid is not uniform")]
    NonUniformGrid,

    #[error("spectrum is empty")]
    EmptySpectrum,

    #[error("gap equation has no positive solution (1/2 V sum 1/|xi| = {rhs_at_zero} <= 1)")]
    NoSolution { rhs_at_zero: f64 },

    #[error("ambiguous assignment for recovered frequency {frequency}: {candidates} exact differences within one bin")]
    AmbiguousAssignment { frequency: f64, candidates: usize },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error is a sampling/aliasing rejection.
    pub fn is_aliasing(&self) -> bool {
        match self {
            Error::Aliased { .. } | Error::NyquistViolation { .. } => true,
            Error::AtTau { source, .. } => source.is_aliasing(),
            _ => false,
        }
    }

    pub fn is_ambiguity(&self) -> bool {
        matches!(self, Error::AmbiguousAssignment { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
