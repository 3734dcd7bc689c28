use thiserror::Error;

/// Errors raised by state construction, gate evaluation and reconstruction.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mode count: {0}")]
    InvalidModeCount(usize),

    #[error("mode {mode} out of range for a {n_modes}-mode state")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("beam splitter needs two distinct modes, got {0} twice")]
    SameMode(usize),

    #[error("reflectivity {0} outside the open interval (0, 1)")]
    Reflectivity(f64),

    #[error("transmission {0} outside [0, 1]")]
    Transmission(f64),

    #[error("negative target: {0} dB")]
    NegativeTarget(f64),

    #[error("negative entanglement: {0} dB")]
    NegativeEntanglement(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("unphysical covariance: smallest symplectic eigenvalue {0}")]
    Unphysical(f64),

    #[error("degenerate quadrature: measured variance {0:e}")]
    DegenerateQuadrature(f64),

    #[error("homodyne conditioning needs at least two modes")]
    NothingLeft,

    #[error("invalid gain {name} = {value}")]
    InvalidGain { name: &'static str, value: f64 },

    #[error("invalid coupler reflectivity {0}")]
    Coupler(f64),

    #[error("invalid detection efficiency {0}")]
    DetectionEfficiency(f64),

    #[error("target not pure (symplectic eigenvalue {0})")]
    NotPure(f64),

    #[error("expected a {expected}-mode state, got {got}")]
    WrongModeCount { expected: usize, got: usize },

    #[error("insufficient phases: {0} distinct, need at least 3")]
    InsufficientPhases(usize),

    #[error("too few shots at phase {phase}: {count}, need at least {min}")]
    TooFewShots {
        phase: f64,
        count: usize,
        min: usize,
    },

    #[error("unphysical reconstruction: symplectic eigenvalue {nu} is {sigmas:.2} standard errors below 1/2")]
    UnphysicalReconstruction { nu: f64, sigmas: f64 },

    #[error("grid does not cover the state to {required} sigma")]
    CoverageViolation { required: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("no LO phases given")]
    NoPhases,

    #[error("shot count must be positive")]
    NoShots,

    #[error("non-finite value: {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
