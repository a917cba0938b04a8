//! Error type shared by all analysis modules.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, ModalError>;

/// Failures raised by the statistic, sampling, and pipeline layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModalError {
    /// Fewer samples than the statistic needs to be meaningful.
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    /// A NaN or infinity was found in sample data.
    #[error("invalid sample: non-finite value at index {index}")]
    InvalidSample { index: usize },

    /// A constant vector carries no rank information.
    #[error("zero-variance input")]
    ZeroVariance,

    /// Requested lag leaves fewer than the minimum usable samples.
    #[error("lag too large: lag {lag} leaves {remaining} samples")]
    LagTooLarge { lag: usize, remaining: usize },

    /// A matrix contains NaN or infinite entries.
    #[error("invalid matrix: non-finite entry")]
    InvalidMatrix,

    /// Whitening found no eigenvalue above the floor.
    #[error("degenerate dependency matrix: no eigenvalue above {floor:e}")]
    DegenerateDependency { floor: f64 },

    /// Matrices handed to joint diagonalization disagree in size.
    #[error("ragged matrix set: expected {expected}x{expected}, got {got_rows}x{got_cols}")]
    RaggedMatrixSet {
        expected: usize,
        got_rows: usize,
        got_cols: usize,
    },

    /// Analytic-signal construction needs a minimum window.
    #[error("window too short: need at least {needed} samples, got {got}")]
    WindowTooShort { needed: usize, got: usize },

    /// The channel has too few zero crossings to fit a mode.
    #[error("no oscillation detected")]
    NoOscillation,

    /// The instantaneous amplitude collapses, so its log-fit is undefined.
    #[error("amplitude degenerate")]
    AmplitudeDegenerate,

    /// Separation pipelines need a multichannel observation.
    #[error("need >=2 channels (use Takens embedding)")]
    NeedTwoChannels,

    /// The delay-coordinate matrix would not fit in the signal.
    #[error("embedding exceeds signal length: need more than {needed} samples, got {got}")]
    EmbeddingTooLong { needed: usize, got: usize },

    /// Window selection found nothing resembling a ringdown onset.
    #[error("no event detected")]
    NoEventDetected,

    /// Mode pairing requires an even number of estimates.
    #[error("unpaired estimate: odd count {count}")]
    UnpairedEstimate { count: usize },

    /// Every divergence column was skipped, so no order can be reported.
    #[error("order undeterminable")]
    OrderUndeterminable,

    /// Row or length mismatch between paired signal sets.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Copula family parameter outside its admissible range.
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    /// Sampling rate violates the Nyquist bound for the requested modes.
    #[error("undersampled: fs {fs} Hz must exceed twice the max mode frequency {fmax} Hz")]
    Undersampled { fs: f64, fmax: f64 },
}
