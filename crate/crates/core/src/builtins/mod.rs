//! Built-in problems: the exponential and cubic superlinear examples and a
//! linear SDE with a closed-form solution.

mod constants;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use constants::{
    derive_example1, derive_example2, grid_maximize, Example1Constants, Example2Constants,
    GRID_POINTS,
};

use crate::analysis::ClosedForm;
use crate::error::{Result, SdeError};
use crate::problem::{ConditionSet, SdeProblem};
use crate::truncation::{build_h_from_profile, TruncationPolicy};

/// A problem with its truncation policy and condition constants.
#[derive(Debug, Clone)]
pub struct Builtin {
    pub problem: SdeProblem,
    pub policy: TruncationPolicy,
    pub conditions: ConditionSet,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(SdeError::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )))
    }
}

/// `dx = (ax - e^{3x}) dt + e^x dB` with `L_R = 3e^{3R}`, and `h` the
/// inverse of `l(R) = 1/(3^4 R^{1-ε} e^{12R})`, so `L_{h(Δ)}^4 Δ = h(Δ)^{ε-1}`.
/// `p = 6`, `q = 4`, `K = a + C + 4`, `H = a + 3/2 e^{4R₀}`.
pub fn example1(a: f64, epsilon: f64, x0: f64, constants: &Example1Constants) -> Result<Builtin> {
    check_epsilon(epsilon)?;
    if !(a > 0.0) {
        return Err(SdeError::InvalidParameter("a must be positive".into()));
    }
    if constants.a != a {
        return Err(SdeError::InvalidParameter(format!(
            "constants were derived for a = {}, not {a}",
            constants.a
        )));
    }
    let problem = SdeProblem::new(
        "example1",
        1,
        1,
        vec![x0],
        move |x, o| o[0] = a * x[0] - (3.0 * x[0]).exp(),
        |x, o| o[0] = x[0].exp(),
        |r| 3.0 * (3.0 * r).exp(),
    )?;
    let policy = TruncationPolicy::inverse_of(
        format!("inverse of l(R) = 1/(3^4 R^(1-eps) e^(12R)), eps = {epsilon}"),
        1.0,
        move |r| -(81f64.ln() + (1.0 - epsilon) * r.ln() + 12.0 * r),
    )?;
    let conditions = ConditionSet::new(6.0, 4.0, constants.k, constants.h)?;
    Ok(Builtin {
        problem,
        policy,
        conditions,
    })
}

/// How the cubic example builds its truncation radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusConstruction {
    /// Inverse of `l(R) = 1/(R L_R^4)`.
    ProfileInverse,
    /// `h(Δ) = sqrt((Δ^{-ε} - 1)/3)` on `Δ < 1`.
    SqrtClosedForm,
}

impl std::str::FromStr for RadiusConstruction {
    type Err = SdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "remark21-inverse" => Ok(Self::ProfileInverse),
            "sqrt-closed-form" => Ok(Self::SqrtClosedForm),
            other => Err(SdeError::InvalidParameter(format!(
                "unknown h construction `{other}`"
            ))),
        }
    }
}

/// `dx = (x - x^3) dt + |x|^{3/2} dB`, `L_R = 3R^2 + 1`, `p = 6`, `q = 4`,
/// `r = 3`, `K̄ = 2`, `H = 13/4 + 81/64`, `K` from a grid search.
pub fn example2(
    epsilon: f64,
    x0: f64,
    radius: RadiusConstruction,
    constants: &Example2Constants,
) -> Result<Builtin> {
    check_epsilon(epsilon)?;
    let profile = |r: f64| 3.0 * r * r + 1.0;
    let problem = SdeProblem::new(
        "example2",
        1,
        1,
        vec![x0],
        |x, o| o[0] = x[0] - x[0] * x[0] * x[0],
        |x, o| o[0] = x[0].abs().powf(1.5),
        profile,
    )?;
    let policy = match radius {
        RadiusConstruction::ProfileInverse => build_h_from_profile(profile, 1.0)?,
        RadiusConstruction::SqrtClosedForm => TruncationPolicy::new(
            format!("h(D) = sqrt((D^-eps - 1)/3), eps = {epsilon}"),
            0.5,
            move |delta| ((delta.powf(-epsilon) - 1.0) / 3.0).sqrt(),
        ),
    };
    let conditions = ConditionSet::new(6.0, 4.0, constants.k, 13.0 / 4.0 + 81.0 / 64.0)?
        .with_diffusion_growth(3.0, 2.0)?;
    Ok(Builtin {
        problem,
        policy,
        conditions,
    })
}

/// `dx = ax dt + bx dB` with `x(t) = x0 exp((a - b^2/2) t + b B(t))`.
pub fn linear(a: f64, b: f64, x0: f64) -> Result<(SdeProblem, ClosedForm)> {
    let lip = a.abs().max(b.abs());
    let problem = SdeProblem::new(
        "linear",
        1,
        1,
        vec![x0],
        move |x, o| o[0] = a * x[0],
        move |x, o| o[0] = b * x[0],
        move |_| lip,
    )?;
    let exact: ClosedForm = Arc::new(move |t, bt, out| {
        out[0] = x0 * ((a - 0.5 * b * b) * t + b * bt[0]).exp();
    });
    Ok((problem, exact))
}

/// Radius far beyond any state the linear example reaches, so MTEM
/// coincides with EM: `h(Δ) = 10^6 Δ^{-1/2}`.
pub fn wide_policy() -> TruncationPolicy {
    TruncationPolicy::new("h(D) = 1e6 D^(-1/2)", 1.0, |delta| 1e6 / delta.sqrt())
}
