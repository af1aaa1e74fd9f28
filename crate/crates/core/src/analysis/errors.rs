//! Coupled strong-error ladders at the horizon and over the fine grid.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::rate::{fit_rate, RateFit};
use super::stats::{for_each_replicate, Estimate};
use super::{MIN_SURVIVORS, REGIME_VIOLATION_FRACTION};
use crate::brownian::DyadicPathLadder;
use crate::error::{Result, SdeError};
use crate::integrators::{run_with_increments, GridSolution, Scheme};
use crate::linalg::distance;
use crate::problem::SdeProblem;
use crate::truncation::TruncationPolicy;

/// Exact solution `x(t)` as a function of `t` and `B(t)`, written into the
/// output slice.
pub type ClosedForm = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// What the coarse runs are compared against.
#[derive(Clone)]
pub enum Reference {
    /// Exact solution evaluated on the ladder's finest grid.
    ClosedForm(ClosedForm),
    /// MTEM at the given level, which is also the ladder's finest level.
    FineGrid { level: u32 },
}

impl fmt::Debug for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl Reference {
    pub fn label(&self) -> String {
        match self {
            Reference::ClosedForm(_) => "closed-form".to_string(),
            Reference::FineGrid { level } => format!("fine:{level}"),
        }
    }
}

/// Configuration of a strong-error ladder.
#[derive(Debug, Clone)]
pub struct ErrorStudy {
    pub scheme: Scheme,
    pub t_end: f64,
    /// Coarse levels, compared in increasing order (decreasing Δ).
    pub levels: Vec<u32>,
    pub reference: Reference,
    /// Finest ladder level for a closed-form reference; defaults to the
    /// deepest coarse level. Ignored for a fine-grid reference.
    pub finest_level: Option<u32>,
    pub q: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl ErrorStudy {
    fn ladder_level(&self) -> u32 {
        match self.reference {
            Reference::FineGrid { level } => level,
            Reference::ClosedForm(_) => self
                .finest_level
                .unwrap_or_else(|| self.levels.iter().copied().max().unwrap_or(0)),
        }
    }
}

/// One ladder row. Estimates average `|x_ref - x_Δ|^q` over non-diverged
/// replicates; sup estimates take the max over the finest grid first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub level: u32,
    pub delta: f64,
    pub h_delta: Option<f64>,
    /// `L_{h(Δ)}`
    pub lipschitz_at_h: Option<f64>,
    /// `L_{h(Δ)}^4 Δ`
    pub l4_delta: Option<f64>,
    /// `E|x(T) - x_Δ(T)|^q`
    pub err_t: Estimate,
    /// `E|x(T) - x̄_Δ(T)|^q`; equal to `err_t` since `x̄_Δ(T) := X_N`.
    pub err_t_step: Estimate,
    /// `E max_t |x(t) - x_Δ(t)|^q`
    pub err_sup: Option<Estimate>,
    /// `E max_t |x(t) - x̄_Δ(t)|^q`
    pub err_sup_step: Option<Estimate>,
    /// Surviving replicates.
    pub replicates: usize,
    pub diverged: usize,
    pub regime_violation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Continuous interpolant at the horizon.
    Terminal,
    /// Continuous interpolant, max over the grid.
    Sup,
    /// Step process, max over the grid.
    SupStep,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Terminal => "T",
            ErrorKind::Sup => "sup",
            ErrorKind::SupStep => "sup_step",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorLadder {
    pub scheme: Scheme,
    pub q: f64,
    pub t_end: f64,
    pub reference: String,
    /// Sorted by decreasing Δ.
    pub rows: Vec<ErrorRow>,
}

impl ErrorLadder {
    /// Rate fit over all rows for the chosen error functional.
    pub fn fit(&self, kind: ErrorKind) -> Result<RateFit> {
        let points = self
            .rows
            .iter()
            .map(|row| {
                let est = match kind {
                    ErrorKind::Terminal => Some(row.err_t),
                    ErrorKind::Sup => row.err_sup,
                    ErrorKind::SupStep => row.err_sup_step,
                };
                est.map(|e| (row.delta, e.mean))
                    .ok_or_else(|| SdeError::InvalidParameter("sup errors were not computed".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut fit = fit_rate(&points, self.q)?;
        if kind == ErrorKind::SupStep {
            fit.theoretical_slope = (self.q / 2.0 - 1.0) / self.q;
        }
        Ok(fit)
    }

    pub fn total_diverged(&self) -> usize {
        self.rows.iter().map(|r| r.diverged).sum()
    }
}

/// Fixed-horizon errors only.
pub fn strong_error_at_t(
    problem: &SdeProblem,
    policy: Option<&TruncationPolicy>,
    study: &ErrorStudy,
) -> Result<ErrorLadder> {
    estimate(problem, policy, study, false)
}

/// Fixed-horizon and grid-sup errors for both readouts.
pub fn strong_error_sup(
    problem: &SdeProblem,
    policy: Option<&TruncationPolicy>,
    study: &ErrorStudy,
) -> Result<ErrorLadder> {
    estimate(problem, policy, study, true)
}

struct LevelSetup {
    level: u32,
    delta: f64,
    h_delta: Option<f64>,
}

type Outcome = Option<[f64; 4]>;

fn truncation_radius(
    scheme: Scheme,
    policy: Option<&TruncationPolicy>,
    delta: f64,
) -> Result<Option<f64>> {
    match (scheme, policy) {
        (Scheme::Em, _) => Ok(None),
        (_, Some(p)) => p.h(delta).map(Some),
        (_, None) => Err(SdeError::InvalidParameter(format!(
            "scheme {scheme} needs a truncation policy"
        ))),
    }
}

pub(crate) fn validate_levels(levels: &[u32], finest: u32) -> Result<Vec<u32>> {
    let mut sorted = levels.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() {
        return Err(SdeError::InvalidParameter("no ladder levels".into()));
    }
    if let Some(&bad) = sorted.iter().find(|&&j| j > finest) {
        return Err(SdeError::LevelOutOfRange { level: bad, finest });
    }
    Ok(sorted)
}

fn estimate(
    problem: &SdeProblem,
    policy: Option<&TruncationPolicy>,
    study: &ErrorStudy,
    with_sup: bool,
) -> Result<ErrorLadder> {
    let finest = study.ladder_level();
    let levels = validate_levels(&study.levels, finest)?;
    let q = study.q;
    let t_end = study.t_end;
    let step = |j: u32| t_end / (1u64 << j) as f64;
    let setups = levels
        .iter()
        .map(|&level| {
            let delta = step(level);
            Ok(LevelSetup {
                level,
                delta,
                h_delta: truncation_radius(study.scheme, policy, delta)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reference_h = match study.reference {
        Reference::FineGrid { level } => Some(truncation_radius(Scheme::Mtem, policy, step(level))?),
        Reference::ClosedForm(_) => None,
    };
    let d = problem.d();

    let replicate = |r: u64| -> Result<Vec<Outcome>> {
        let ladder = DyadicPathLadder::generate(t_end, finest, problem.m(), study.seed, r)?;
        let cumulative = (with_sup || matches!(study.reference, Reference::ClosedForm(_)))
            .then(|| ladder.cumulative());
        // reference values on the finest grid (row-major), or only at T
        let reference: Vec<f64> = match &study.reference {
            Reference::FineGrid { level } => {
                let sol = run_with_increments(
                    problem,
                    Scheme::Mtem,
                    reference_h.flatten(),
                    step(*level),
                    *level,
                    ladder.increments(),
                )?;
                if sol.diverged() {
                    return Ok(vec![None; setups.len()]);
                }
                if with_sup {
                    sol.states().to_vec()
                } else {
                    sol.terminal().expect("completed").to_vec()
                }
            }
            Reference::ClosedForm(exact) => {
                let cum = cumulative.as_deref().expect("computed for closed form");
                let m = problem.m();
                let n = ladder.len();
                let range = if with_sup { 0..=n } else { n..=n };
                let mut out = Vec::with_capacity(range.clone().count() * d);
                let mut x = vec![0.0; d];
                for i in range {
                    exact(i as f64 * ladder.delta_min(), &cum[i * m..(i + 1) * m], &mut x);
                    out.extend_from_slice(&x);
                }
                out
            }
        };
        let ref_terminal = &reference[reference.len() - d..];
        let mut increments = Vec::new();
        setups
            .iter()
            .map(|s| {
                ladder.coarsen_into(s.level, &mut increments)?;
                let sol = run_with_increments(problem, study.scheme, s.h_delta, s.delta, s.level, &increments)?;
                let Some(terminal) = sol.terminal() else {
                    return Ok(None);
                };
                let err_t = distance(ref_terminal, terminal).powf(q);
                let (sup, sup_step) = if with_sup {
                    sup_errors(problem, &sol, &ladder, cumulative.as_deref().unwrap(), &reference, q)?
                } else {
                    (f64::NAN, f64::NAN)
                };
                Ok(Some([err_t, err_t, sup, sup_step]))
            })
            .collect()
    };

    let mut columns: Vec<Vec<[f64; 4]>> = vec![Vec::new(); setups.len()];
    let mut diverged = vec![0usize; setups.len()];
    for_each_replicate(study.replicates, replicate, |outcomes| {
        for (i, o) in outcomes.into_iter().enumerate() {
            match o {
                Some(v) => columns[i].push(v),
                None => diverged[i] += 1,
            }
        }
        Ok(())
    })?;

    let mut rows = Vec::with_capacity(setups.len());
    for ((s, col), div) in setups.iter().zip(&columns).zip(&diverged) {
        if col.len() < MIN_SURVIVORS {
            return Err(SdeError::InsufficientSample {
                level: s.level,
                survivors: col.len(),
            });
        }
        let pick = |i: usize| Estimate::from_samples(&col.iter().map(|v| v[i]).collect::<Vec<_>>());
        let lipschitz_at_h = s.h_delta.map(|h| problem.lipschitz(h));
        rows.push(ErrorRow {
            level: s.level,
            delta: s.delta,
            h_delta: s.h_delta,
            lipschitz_at_h,
            l4_delta: lipschitz_at_h.map(|l| l.powi(4) * s.delta),
            err_t: pick(0),
            err_t_step: pick(1),
            err_sup: with_sup.then(|| pick(2)),
            err_sup_step: with_sup.then(|| pick(3)),
            replicates: col.len(),
            diverged: *div,
            regime_violation: *div as f64 > REGIME_VIOLATION_FRACTION * study.replicates as f64,
        });
    }
    Ok(ErrorLadder {
        scheme: study.scheme,
        q,
        t_end,
        reference: study.reference.label(),
        rows,
    })
}

/// Max over the finest grid of `|ref - x_Δ|^q` and `|ref - x̄_Δ|^q`.
fn sup_errors(
    problem: &SdeProblem,
    sol: &GridSolution,
    ladder: &DyadicPathLadder,
    cumulative: &[f64],
    reference: &[f64],
    q: f64,
) -> Result<(f64, f64)> {
    let d = problem.d();
    let ratio = sol.fine_ratio(ladder)?;
    let path = sol.continuous_path(problem, ladder, cumulative)?;
    let (mut sup, mut sup_step) = (0.0f64, 0.0f64);
    for i in 0..=ladder.len() {
        let r = &reference[i * d..(i + 1) * d];
        sup = sup.max(distance(r, &path[i * d..(i + 1) * d]));
        let k = (i / ratio).min(sol.steps());
        sup_step = sup_step.max(distance(r, sol.state(k).expect("completed")));
    }
    Ok((sup.powf(q), sup_step.powf(q)))
}
