use thiserror::Error;

use crate::hilbert::CompositeSpace;

/// Everything that can go wrong while building spaces, operators, channels
/// or running the purification loop.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("at least one emitter is required")]
    NoEmitters,

    #[error("space dimension {dim} exceeds the configured limit {limit}")]
    DimensionTooLarge { dim: u128, limit: usize },

    #[error("photon number {photons} exceeds the cutoff {cutoff}")]
    PhotonOutOfRange { photons: usize, cutoff: usize },

    #[error("emitter configuration has {got} labels but the space has {expected} emitters")]
    BitstringLength { expected: usize, got: usize },

    #[error("invalid emitter label {0:?} (expected one of 0, 1, g, e)")]
    InvalidBit(char),

    #[error("emitter index {index} is out of range 1..={n_emitters}")]
    EmitterIndex { index: usize, n_emitters: usize },

    #[error("operands live in different spaces ({left} vs {right})")]
    SpaceMismatch {
        left: CompositeSpace,
        right: CompositeSpace,
    },

    #[error("vector of length {got} does not fit a space of dimension {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian (max residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error(
        "photon cutoff {cutoff} cannot hold the sector reachable from {kept} kept photons; \
         a cutoff of at least {required} is needed (emitters + kept photons)"
    )]
    SectorNotClosed {
        cutoff: usize,
        kept: usize,
        required: usize,
    },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("state label `{label}` is not defined for {n_emitters} emitters")]
    IncompatibleLabel { label: String, n_emitters: usize },

    #[error(
        "conditional branch probability {probability:e} is at or below the threshold {threshold:e}; \
         the procedure has to be restarted"
    )]
    ProtocolFailure { probability: f64, threshold: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
