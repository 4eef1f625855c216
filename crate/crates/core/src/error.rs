use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sequence is empty")]
    EmptySequence,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value at frame {frame}, component {component}")]
    NonFiniteValue { frame: usize, component: usize },
    #[error("invalid interval: start {start} must be below end {end}")]
    InvalidInterval { start: f64, end: f64 },
    #[error("invalid codebook: {0}")]
    InvalidCodebook(&'static str),
    #[error("token {token} out of range for alphabet of size {k}")]
    TokenOutOfRange { token: u32, k: usize },
    #[error("cannot parse token {0:?}")]
    BadToken(alloc::string::String),
    #[error("too few frames: {frames} frames for {k} clusters")]
    TooFewFrames { frames: usize, k: usize },
    #[error("sequence too short: {0} frames")]
    SequenceTooShort(usize),
    #[error("no periodicity found")]
    NoPeriodicity,
    #[error("empty segment")]
    EmptySegment,
    #[error("every window candidate yields fewer than two segments")]
    DegeneratePartition,
    #[error("invalid window bounds [{min}, {max}] for length {len}")]
    InvalidWindowBounds { min: usize, max: usize, len: usize },
    #[error("empty transcript")]
    EmptyTranscript,
    #[error("alignment needs at least two sequences, got {0}")]
    TooFewSequences(usize),
    #[error("joint alignment of {0} sequences exceeds the configured maximum")]
    TooManySequences(usize),
    #[error("joint alignment needs {cells} cells, above the limit of {limit}")]
    MatrixTooLarge { cells: u128, limit: u128 },
    #[error("window {window} too large for {frames} frames")]
    WindowTooLarge { window: usize, frames: usize },
    #[error("invalid buffer fraction {0}")]
    InvalidBuffer(f64),
    #[error("alignment degenerates to nothing")]
    DegenerateAlignment,
    #[error("stream contains no open period")]
    NoOpenPeriod,
    #[error("length mismatch: {0} predictions for {1} ground truths")]
    LengthMismatch(usize, usize),
    #[error("ground-truth count {0} is below 3")]
    InvalidGroundTruth(usize),
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("centroid rejection sampling exhausted")]
    CentroidRejectionExhausted,
    #[error("invalid generator spec: {0}")]
    InvalidSpec(&'static str),
}
