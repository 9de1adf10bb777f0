use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the reconstruction pipelines and their inputs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state vector is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("postselection probability is zero (or below tolerance)")]
    OrthogonalPostselection,

    #[error("coupling strength g = {g} gives |e^(-ig) - 1| below tolerance")]
    DegenerateCoupling { g: f64 },

    #[error("path pointer has eta = 0; readout carries no signal")]
    DegeneratePointer,

    #[error("probability pair lies outside the invertible disc (a^2 + b^2 >= 1/4)")]
    InversionOutOfRange,

    #[error("matrix is not a physical density matrix: {0}")]
    NonPhysicalInput(String),

    #[error("coupling g = {g} exceeds pointer width sigma = {sigma}")]
    CouplingTooStrong { g: f64, sigma: f64 },

    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error(
        "rejection sampler acceptance rate {acceptance:.3e} below 1e-4; envelope is mis-sized"
    )]
    EnvelopeFailure { acceptance: f64 },

    #[error("moment pattern has only {n} samples; at least 100 required")]
    InsufficientSamples { n: usize },

    #[error("hermitized estimate has non-positive trace; cannot project")]
    DegenerateInput,

    #[error("invalid StateSpec: {0}")]
    InvalidStateSpec(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("mixed-state rank must lie in 1..=4, got {0}")]
    InvalidRank(u32),

    #[error("invalid shot plan: {0}")]
    InvalidShotPlan(String),
}
