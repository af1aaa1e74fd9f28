//! Modified truncated Euler-Maruyama (MTEM) scheme for SDEs with locally
//! Lipschitz, superlinearly growing coefficients, with a Monte Carlo harness
//! for empirical strong convergence rates.
//!
//! Module map:
//! - [`linalg`], [`problem`]: norms, problem definitions, condition constants.
//! - [`truncation`]: `f_Δ`/`g_Δ`, the radius `h(Δ)`, admissibility checks.
//! - [`brownian`]: counter-based dyadic Brownian ladders.
//! - [`integrators`]: MTEM, EM and Mao's truncated EM on a ladder.
//! - [`analysis`]: strong error ladders, moment tables, rate fits, condition margins.
//! - [`builtins`]: the two superlinear examples and a linear oracle problem.

pub mod analysis;
pub mod brownian;
pub mod builtins;
pub mod error;
pub mod integrators;
pub mod linalg;
pub mod margin;
pub mod problem;
mod sampling;
pub mod truncation;

pub use brownian::DyadicPathLadder;
pub use error::{Result, SdeError};
pub use integrators::{run, GridSolution, Scheme};
pub use margin::MarginReport;
pub use problem::{ConditionSet, SdeProblem};
pub use truncation::{build_h_from_profile, TruncationPolicy};
