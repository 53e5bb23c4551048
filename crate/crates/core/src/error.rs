use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("eigen-decomposition did not converge")]
    NoConvergence,
    #[error("non-finite values encountered")]
    NonFinite,
}

/// Rejected model inputs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("array needs at least 2 antennas, got {0}")]
    TooFewAntennas(usize),
    #[error("antenna spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("direction {0} rad is not finite")]
    NonFiniteAngle(f64),
    #[error("direction {0} rad is outside (-pi/2, pi/2)")]
    AngleOutOfRange(f64),
    #[error("at least one source is required")]
    NoSources,
    #[error("source directions must be strictly increasing")]
    UnsortedSources,
    #[error("signal variance must be positive, got {0}")]
    InvalidSignalVariance(f64),
    #[error("{sources} sources need more than {sources} antennas, got {antennas}")]
    TooManySources { sources: usize, antennas: usize },
    #[error("snapshot count must be at least 1")]
    NoSnapshots,
    #[error("coupling taps must be in 1..={antennas}, got {taps}")]
    InvalidTaps { taps: usize, antennas: usize },
    #[error("coupling vector needs length {expected}, got {got}")]
    CouplingLength { expected: usize, got: usize },
    #[error("{what} must be finite, got {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("grid range [{lo}, {hi}] is empty")]
    EmptyRange { lo: f64, hi: f64 },
    #[error("grid step {step} must be positive and not exceed the range width {width}")]
    InvalidStep { step: f64, width: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Failure of an estimator run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{stage} failed at iteration {iteration}: {source}")]
    Solver {
        stage: &'static str,
        iteration: usize,
        #[source]
        source: LinalgError,
    },
    #[error("invalid hyperparameter {name} = {value}")]
    InvalidHyperparameter { name: &'static str, value: f64 },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(&'static str),
    #[error("MUSIC needs fewer sources than antennas ({sources} >= {antennas})")]
    MusicOrder { sources: usize, antennas: usize },
    #[error("requested {requested} peaks from {available} grid points")]
    TooManyPeaks { requested: usize, available: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
