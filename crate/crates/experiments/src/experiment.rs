//! Condition reports and strong-error runs, with their CSV and JSON output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mtem_core::analysis::{
    check_diffusion_growth, check_khasminskii, check_monotonicity_condition, strong_error_sup,
    ErrorKind, ErrorLadder, ErrorStudy, Reference,
};
use mtem_core::problem::{check_local_lipschitz, LipschitzReport};
use mtem_core::truncation::{check_step_admissible, Admissibility};
use mtem_core::{ConditionSet, MarginReport, Scheme};
use serde::Serialize;

use crate::config::{ExperimentConfig, ReferenceChoice};
use crate::error::{CliError, Result};
use crate::setup::{DerivedConstants, Setup};

pub const SCHEMA_VERSION: u32 = 1;

pub const ERROR_LADDER_HEADER: &str = "scheme,delta,level,q,err_T_mean,err_T_se,err_sup_mean,err_sup_se,\
err_T_step_mean,err_T_step_se,L_h_delta,L4_delta,replicates,diverged";

pub const DIVERGENCE_HEADER: &str = "scheme,level,delta,replicates,survivors,diverged,fraction,regime_violation";

#[derive(Debug, Clone, Serialize)]
pub struct Margin {
    pub worst: f64,
    pub samples: usize,
    pub holds: bool,
}

impl From<MarginReport> for Margin {
    fn from(r: MarginReport) -> Self {
        Margin {
            worst: r.worst,
            samples: r.samples,
            holds: r.holds(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzEntry {
    #[serde(flatten)]
    pub report: LipschitzReport,
    pub consistent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityEntry {
    pub level: u32,
    #[serde(flatten)]
    pub checks: Admissibility,
    pub theorem_covered: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionChecks {
    pub monotonicity: Margin,
    pub khasminskii: Margin,
    pub diffusion_growth: Option<Margin>,
    pub local_lipschitz: Vec<LipschitzEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionsReport {
    pub schema_version: u32,
    pub problem: String,
    pub x0: f64,
    pub radius_construction: String,
    pub policy: String,
    pub derived_constants: Option<DerivedConstants>,
    pub conditions: ConditionSet,
    pub samples: usize,
    pub radius: f64,
    pub seed: u64,
    pub checks: ConditionChecks,
    pub admissibility: Vec<AdmissibilityEntry>,
}

impl ConditionsReport {
    pub fn all_hold(&self) -> bool {
        let c = &self.checks;
        c.monotonicity.holds
            && c.khasminskii.holds
            && c.diffusion_growth.as_ref().is_none_or(|m| m.holds)
            && c.local_lipschitz.iter().all(|l| l.consistent)
    }
}

pub fn check_conditions(config: &ExperimentConfig, setup: &Setup) -> Result<ConditionsReport> {
    let (problem, cond) = (&setup.problem, &setup.conditions);
    let (n, radius, seed) = (config.check_samples, config.check_radius, config.seed);
    let checks = ConditionChecks {
        monotonicity: check_monotonicity_condition(problem, cond, n, radius, seed)?.into(),
        khasminskii: check_khasminskii(problem, cond, n, radius, seed.wrapping_add(1))?.into(),
        diffusion_growth: match cond.r {
            Some(_) => Some(check_diffusion_growth(problem, cond, n, radius, seed.wrapping_add(2))?.into()),
            None => None,
        },
        local_lipschitz: [1.0, radius.sqrt(), radius]
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let report = check_local_lipschitz(problem, r, n, seed.wrapping_add(3 + i as u64))?;
                Ok(LipschitzEntry {
                    consistent: report.consistent(),
                    report,
                })
            })
            .collect::<Result<_>>()?,
    };
    let admissibility = config
        .levels
        .iter()
        .map(|&level| {
            let delta = config.t_end / (1u64 << level) as f64;
            let checks = check_step_admissible(problem, &setup.policy, cond, delta)?;
            Ok(AdmissibilityEntry {
                level,
                theorem_covered: checks.theorem_covered(),
                checks,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ConditionsReport {
        schema_version: SCHEMA_VERSION,
        problem: problem.name().to_string(),
        x0: config.x0,
        radius_construction: config.radius.name().to_string(),
        policy: setup.policy.description().to_string(),
        derived_constants: setup.constants.clone(),
        conditions: *cond,
        samples: n,
        radius,
        seed,
        checks,
        admissibility,
    })
}

/// One rate fit; the first eight keys are the fixed rate-fit schema.
#[derive(Debug, Clone, Serialize)]
pub struct FitEntry {
    pub schema_version: u32,
    pub problem: String,
    pub scheme: Scheme,
    pub q: f64,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub residual: Option<f64>,
    pub rows_used: usize,
    /// Which error: `T`, `sup` (interpolant) or `sup_step` (step process).
    pub error: &'static str,
    pub theoretical_slope: f64,
    pub reference: String,
    pub fit_error: Option<String>,
    /// Levels whose divergence fraction exceeded the regime threshold.
    pub regime_violations: Vec<u32>,
}

pub struct RunOutcome {
    pub conditions: ConditionsReport,
    pub ladders: Vec<ErrorLadder>,
    pub fits: Vec<FitEntry>,
}

impl RunOutcome {
    pub fn fit(&self, scheme: Scheme, error: ErrorKind) -> Option<&FitEntry> {
        self.fits
            .iter()
            .find(|f| f.scheme == scheme && f.error == error.name())
    }
}

/// Runs every configured scheme and writes the four output files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    let setup = Setup::new(config)?;
    let conditions = check_conditions(config, &setup)?;
    let q = setup.conditions.q;
    let (reference, finest_level) = match config.reference {
        ReferenceChoice::Fine(level) => (Reference::FineGrid { level }, None),
        ReferenceChoice::ClosedForm(level) => (
            Reference::ClosedForm(
                setup.closed_form.clone().ok_or_else(|| CliError::config("problem has no closed form"))?,
            ),
            Some(level),
        ),
    };
    let mut ladders = Vec::new();
    let mut fits = Vec::new();
    for &scheme in &config.schemes {
        let study = ErrorStudy {
            scheme,
            t_end: config.t_end,
            levels: config.levels.clone(),
            reference: reference.clone(),
            finest_level,
            q,
            replicates: config.replicates,
            seed: config.seed,
        };
        let ladder = strong_error_sup(&setup.problem, Some(&setup.policy), &study)?;
        let violations: Vec<u32> = ladder.rows.iter().filter(|r| r.regime_violation).map(|r| r.level).collect();
        for kind in [ErrorKind::Terminal, ErrorKind::Sup, ErrorKind::SupStep] {
            let fit = ladder.fit(kind);
            let theoretical_slope = match kind {
                ErrorKind::SupStep => (q / 2.0 - 1.0) / q,
                _ => 0.5,
            };
            fits.push(FitEntry {
                schema_version: SCHEMA_VERSION,
                problem: setup.problem.name().to_string(),
                scheme,
                q,
                slope: fit.as_ref().ok().map(|f| f.slope),
                intercept: fit.as_ref().ok().map(|f| f.intercept),
                residual: fit.as_ref().ok().map(|f| f.residual),
                rows_used: fit.as_ref().map_or(0, |f| f.rows_used),
                error: kind.name(),
                theoretical_slope,
                reference: ladder.reference.clone(),
                fit_error: fit.err().map(|e| e.to_string()),
                regime_violations: violations.clone(),
            });
        }
        ladders.push(ladder);
    }
    let outcome = RunOutcome {
        conditions,
        ladders,
        fits,
    };
    write_outputs(config, &outcome)?;
    Ok(outcome)
}

fn write_outputs(config: &ExperimentConfig, outcome: &RunOutcome) -> Result<()> {
    let out = &config.output;
    fs::create_dir_all(&out.dir).map_err(|e| CliError::io(format!("creating {}", out.dir.display()), e))?;
    write_file(&out.error_ladder(), &error_ladder_csv(&outcome.ladders))?;
    write_file(&out.divergence(), &divergence_csv(&outcome.ladders, config.replicates))?;
    write_json(&out.rate_fit(), &outcome.fits)?;
    write_json(&out.conditions(), &outcome.conditions)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}

/// Plain decimal in the ordinary range, scientific otherwise; both forms
/// round-trip exactly.
pub fn format_number(v: f64) -> String {
    if v == 0.0 || (1e-4..1e7).contains(&v.abs()) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn optional(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

pub fn error_ladder_csv(ladders: &[ErrorLadder]) -> String {
    let mut csv = format!("{ERROR_LADDER_HEADER}\n");
    for ladder in ladders {
        for r in &ladder.rows {
            let cells = [
                ladder.scheme.name().to_string(),
                format_number(r.delta),
                r.level.to_string(),
                format_number(ladder.q),
                format_number(r.err_t.mean),
                format_number(r.err_t.se),
                optional(r.err_sup.map(|e| e.mean)),
                optional(r.err_sup.map(|e| e.se)),
                format_number(r.err_t_step.mean),
                format_number(r.err_t_step.se),
                optional(r.lipschitz_at_h),
                optional(r.l4_delta),
                r.replicates.to_string(),
                r.diverged.to_string(),
            ];
            let _ = writeln!(csv, "{}", cells.join(","));
        }
    }
    csv
}

pub fn divergence_csv(ladders: &[ErrorLadder], requested: usize) -> String {
    let mut csv = format!("{DIVERGENCE_HEADER}\n");
    for ladder in ladders {
        for r in &ladder.rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                ladder.scheme.name(),
                r.level,
                format_number(r.delta),
                requested,
                r.replicates,
                r.diverged,
                format_number(r.diverged as f64 / requested as f64),
                r.regime_violation
            );
        }
    }
    csv
}
