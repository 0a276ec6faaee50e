use thiserror::Error;

/// Errors raised by the purification toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PurifyError {
    #[error("invalid subsystem shape: {0}")]
    InvalidShape(String),

    #[error("subsystem index {index} out of range for {count} subsystems (indices are 1-based)")]
    SubsystemOutOfRange { index: usize, count: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (‖M − M†‖_F = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("noise parameter {0} is outside [0, 1]")]
    NoiseOutOfRange(f64),

    #[error("problem exceeds the dense budget: {0}")]
    BudgetExceeded(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("goal fidelity {goal} is unreachable within {cap} copies (best fidelity {best})")]
    UnreachableGoal { goal: f64, cap: usize, best: f64 },

    #[error("post-selection success probability {0:.3e} is too small")]
    ZeroSuccessProbability(f64),

    #[error("ideal state is ambiguous: the largest eigenvalue of the input is degenerate")]
    DegenerateSpectrum,

    #[error("equality constraints are linearly dependent")]
    RankDeficient,

    #[error("circuit training did not converge (best residual {best_residual:.3e})")]
    TrainingFailed { best_residual: f64 },
}

pub type Result<T> = std::result::Result<T, PurifyError>;
