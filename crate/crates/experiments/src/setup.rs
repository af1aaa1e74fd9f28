//! Turns a configuration into a problem, a truncation policy and condition
//! constants, deriving or loading the grid-search constants of the examples.

use std::path::Path;

use mtem_core::analysis::ClosedForm;
use mtem_core::builtins::{
    self, derive_example1, derive_example2, Example1Constants, Example2Constants, GRID_POINTS,
};
use mtem_core::{build_h_from_profile, ConditionSet, SdeProblem, TruncationPolicy};
use serde::{Deserialize, Serialize};

use crate::config::{ConditionOverrides, ExperimentConfig, ProblemKind, RadiusChoice};
use crate::error::{CliError, Result};

/// Search range for the cubic example's Khasminskii constant.
pub const EXAMPLE2_SEARCH_RADIUS: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "lowercase")]
pub enum DerivedConstants {
    Example1 {
        method: String,
        constants: Example1Constants,
    },
    Example2 {
        method: String,
        constants: Example2Constants,
    },
}

/// Contents of a `derive-constants` provenance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsFile {
    pub schema_version: u32,
    #[serde(flatten)]
    pub derived: DerivedConstants,
}

pub fn derive_constants(problem: &str, a: f64, p: f64, points: usize) -> Result<DerivedConstants> {
    if points < 2 {
        return Err(CliError::config("grid needs at least two points"));
    }
    match problem {
        "example1" => {
            if !(a > 0.0) {
                return Err(CliError::config("a must be positive"));
            }
            Ok(DerivedConstants::Example1 {
                method: format!(
                    "C: max of -x e^(3x) + e^(2x) on a {points}-point grid over [0, 10] with golden-section refinement; \
                     R0: twice the first grid point beyond the last non-negative value of \
                     -z e^(3z) + z + 3/2 (e^(2z) - 2e^z + 1) on a {points}-point grid over (0, 20]; \
                     K = a + C + 4; H = a + 3/2 e^(4 R0)"
                ),
                constants: derive_example1(a, points),
            })
        }
        "example2" => Ok(DerivedConstants::Example2 {
            method: format!(
                "K: max of (x f(x) + (p-1)/2 g(x)^2) / (1 + x^2) on a {points}-point grid over \
                 |x| <= {EXAMPLE2_SEARCH_RADIUS} with golden-section refinement"
            ),
            constants: derive_example2(p, EXAMPLE2_SEARCH_RADIUS, points),
        }),
        other => Err(CliError::config(format!(
            "no derived constants for problem `{other}` (expected example1 or example2)"
        ))),
    }
}

pub fn load_constants(path: &Path) -> Result<DerivedConstants> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let file: ConstantsFile = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if file.schema_version != 1 {
        return Err(CliError::config(format!(
            "{}: unsupported schema_version {}",
            path.display(),
            file.schema_version
        )));
    }
    Ok(file.derived)
}

pub struct Setup {
    pub problem: SdeProblem,
    pub policy: TruncationPolicy,
    pub conditions: ConditionSet,
    pub closed_form: Option<ClosedForm>,
    pub constants: Option<DerivedConstants>,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let ov = config.conditions;
        let p = ov.p.unwrap_or(6.0);
        let constants = match (&config.problem, &config.constants) {
            (ProblemKind::Example1 { .. } | ProblemKind::Example2 { .. }, Some(path)) => {
                Some(load_constants(path)?)
            }
            (ProblemKind::Example1 { a, .. }, None) => Some(derive_constants("example1", *a, p, GRID_POINTS)?),
            (ProblemKind::Example2 { .. }, None) => Some(derive_constants("example2", 1.0, p, GRID_POINTS)?),
            _ => None,
        };
        let mismatch = || {
            CliError::config(format!(
                "constants file is not for problem `{}`",
                config.problem.name()
            ))
        };
        let x0 = config.x0;
        let (problem, policy, conditions, closed_form) = match &config.problem {
            ProblemKind::Example1 { a, epsilon } => {
                let Some(DerivedConstants::Example1 { constants: c, .. }) = &constants else {
                    return Err(mismatch());
                };
                let mut b = builtins::example1(*a, *epsilon, x0, c)?;
                if config.radius == RadiusChoice::ProfileInverse {
                    b.policy = build_h_from_profile(|r| 3.0 * (3.0 * r).exp(), 1.0)?;
                }
                (b.problem, b.policy, b.conditions, None)
            }
            ProblemKind::Example2 { epsilon } => {
                let Some(DerivedConstants::Example2 { constants: c, .. }) = &constants else {
                    return Err(mismatch());
                };
                if c.p != p {
                    return Err(CliError::config(format!(
                        "constants were derived for p = {}, config uses p = {p}",
                        c.p
                    )));
                }
                let construction = config.radius.construction().expect("validated radius");
                let b = builtins::example2(*epsilon, x0, construction, c)?;
                (b.problem, b.policy, b.conditions, None)
            }
            ProblemKind::Linear { a, b } => {
                let (problem, exact) = builtins::linear(*a, *b, x0)?;
                let k = a.abs() + 0.5 * (p - 1.0) * b * b;
                // twice the exact one-sided constant, so rounding in near-pair
                // samples cannot push the sampled ratio over one
                let h = 2.0 * (a.abs() + 0.5 * (ov.q.unwrap_or(4.0) - 1.0) * b * b);
                if !(k > 0.0) {
                    return Err(CliError::config("linear problem needs a or b nonzero"));
                }
                let policy = radius_policy(config, &problem)?;
                let cond = ConditionSet::new(6.0, 4.0, k, h)?;
                (problem, policy, cond, Some(exact))
            }
            ProblemKind::Inline {
                drift,
                diffusion,
                lipschitz,
            } => {
                let (Some(k), Some(h)) = (ov.k, ov.h) else {
                    return Err(CliError::config("inline problems need [conditions] k and h"));
                };
                let (f, g, l) = (drift.clone(), diffusion.clone(), lipschitz.clone());
                let problem = SdeProblem::new(
                    "inline",
                    1,
                    1,
                    vec![x0],
                    move |x, o| o[0] = f.eval(x[0]),
                    move |x, o| o[0] = g.eval(x[0]),
                    move |r| l.eval(r),
                )?;
                let policy = radius_policy(config, &problem)?;
                (problem, policy, ConditionSet::new(6.0, 4.0, k, h)?, None)
            }
        };
        Ok(Setup {
            problem,
            policy,
            conditions: apply_overrides(conditions, ov)?,
            closed_form,
            constants,
        })
    }
}

fn radius_policy(config: &ExperimentConfig, problem: &SdeProblem) -> Result<TruncationPolicy> {
    Ok(match config.radius {
        RadiusChoice::Wide => builtins::wide_policy(),
        _ => {
            let p = problem.clone();
            build_h_from_profile(move |r| p.lipschitz(r), config.t_end.max(1.0))?
        }
    })
}

fn apply_overrides(base: ConditionSet, ov: ConditionOverrides) -> Result<ConditionSet> {
    let set = ConditionSet {
        p: ov.p.unwrap_or(base.p),
        q: ov.q.unwrap_or(base.q),
        r: ov.r.or(base.r),
        k: ov.k.unwrap_or(base.k),
        h: ov.h.unwrap_or(base.h),
        k_bar: ov.k_bar.or(base.k_bar),
    };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_file_round_trip() {
        let derived = derive_constants("example2", 1.0, 6.0, 1000).unwrap();
        let file = ConstantsFile {
            schema_version: 1,
            derived: derived.clone(),
        };
        let text = serde_json::to_string(&file).unwrap();
        assert!(text.contains("\"problem\":\"example2\""));
        let back: ConstantsFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.derived, derived);
    }

    #[test]
    fn unknown_problem_has_no_constants() {
        assert_eq!(derive_constants("linear", 1.0, 6.0, 100).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn overrides_apply_and_validate() {
        let base = ConditionSet::new(6.0, 4.0, 1.0, 1.0).unwrap();
        let set = apply_overrides(base, ConditionOverrides { q: Some(3.0), ..Default::default() }).unwrap();
        assert_eq!(set.q, 3.0);
        assert!(apply_overrides(base, ConditionOverrides { q: Some(7.0), ..Default::default() }).is_err());
    }
}
