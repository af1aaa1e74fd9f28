use thiserror::Error;

/// Errors raised by the library. Non-finite scheme output is not an error;
/// it is recorded on the trajectory as a divergence index.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SdeError {
    #[error("non-finite state")]
    NonFiniteState,
    #[error("non-finite matrix")]
    NonFiniteMatrix,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("profile not invertible on range")]
    ProfileNotInvertible,
    #[error("step {delta} outside the policy domain (0, {delta_star}]")]
    StepOutsideDomain { delta: f64, delta_star: f64 },
    #[error("ladder too deep: level {0} exceeds 26")]
    LadderTooDeep(u32),
    #[error("level {level} out of range 0..={finest}")]
    LevelOutOfRange { level: u32, finest: u32 },
    #[error("time {t} outside [0, {t_end}]")]
    TimeOutOfRange { t: f64, t_end: f64 },
    #[error("step not dyadic: {0}")]
    StepNotDyadic(f64),
    #[error("trajectory diverged at step {0}")]
    Diverged(usize),
    #[error("insufficient sample: {survivors} surviving replicates at level {level}")]
    InsufficientSample { level: u32, survivors: usize },
    #[error("degenerate ladder")]
    DegenerateLadder,
}

pub type Result<T> = std::result::Result<T, SdeError>;
