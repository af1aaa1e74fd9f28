//! Monte Carlo strong-error estimation, moment bounds, interpolant gaps,
//! log-log rate fitting and sampled condition margins.
//!
//! Replicates run in parallel but are consumed in index order, so every
//! statistic is bitwise independent of the thread count.

mod conditions;
mod errors;
mod moments;
mod rate;
mod stats;

pub use conditions::{check_diffusion_growth, check_khasminskii, check_monotonicity_condition};
pub use errors::{
    strong_error_at_t, strong_error_sup, ClosedForm, ErrorKind, ErrorLadder, ErrorRow,
    ErrorStudy, Reference,
};
pub use moments::{
    empirical_moment_sup, interpolant_gap, GapLadder, GapRow, MomentRow, MomentStudy,
    MomentTable, GapStudy,
};
pub use rate::{fit_rate, RateFit};
pub use stats::Estimate;

/// Fewest surviving replicates accepted per ladder level.
pub const MIN_SURVIVORS: usize = 100;

/// Divergence fraction above which a row is flagged as a regime violation.
pub const REGIME_VIOLATION_FRACTION: f64 = 0.01;
