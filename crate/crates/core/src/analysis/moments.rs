//! Empirical moment bounds of the scheme and the gap between its two
//! continuous-time readouts.

use serde::Serialize;

use super::errors::validate_levels;
use super::rate::{fit_rate, RateFit};
use super::stats::{for_each_replicate, Estimate};
use super::MIN_SURVIVORS;
use crate::brownian::DyadicPathLadder;
use crate::error::{Result, SdeError};
use crate::integrators::{run_with_increments, Scheme};
use crate::linalg::{distance, norm};
use crate::problem::SdeProblem;
use crate::truncation::TruncationPolicy;

#[derive(Debug, Clone)]
pub struct MomentStudy {
    pub scheme: Scheme,
    pub t_end: f64,
    pub levels: Vec<u32>,
    /// Grid on which the continuous interpolant's sup is taken.
    pub finest_level: u32,
    /// Exponent of the pointwise moment `max_k E|X_k|^p`.
    pub p: f64,
    /// Exponent of the sup moment `E max_t |x_Δ(t)|^p̄`.
    pub p_bar: f64,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRow {
    pub level: u32,
    pub delta: f64,
    /// `max_k mean |X_k|^p` over surviving replicates.
    pub max_mean_moment: f64,
    /// `mean max_t |x_Δ(t)|^p̄` over the finest grid.
    pub mean_sup_moment: Estimate,
    pub replicates: usize,
    pub diverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    pub scheme: Scheme,
    pub p: f64,
    pub p_bar: f64,
    pub rows: Vec<MomentRow>,
}

impl MomentTable {
    /// Largest over smallest `max_mean_moment` across rows; infinite when a
    /// row has no survivors.
    pub fn pointwise_spread(&self) -> f64 {
        spread(self.rows.iter().map(|r| r.max_mean_moment))
    }

    /// Largest over smallest `mean_sup_moment` across rows.
    pub fn sup_spread(&self) -> f64 {
        spread(self.rows.iter().map(|r| r.mean_sup_moment.mean))
    }

    pub fn total_diverged(&self) -> usize {
        self.rows.iter().map(|r| r.diverged).sum()
    }
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for v in values {
        if !v.is_finite() {
            return f64::INFINITY;
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi / lo
}

fn radius(scheme: Scheme, policy: Option<&TruncationPolicy>, delta: f64) -> Result<Option<f64>> {
    match (scheme, policy) {
        (Scheme::Em, _) => Ok(None),
        (_, Some(p)) => p.h(delta).map(Some),
        (_, None) => Err(SdeError::InvalidParameter(format!(
            "scheme {scheme} needs a truncation policy"
        ))),
    }
}

/// Per level: `max_k E|X_k|^p` and `E max_t |x_Δ(t)|^p̄`. Diverged
/// replicates are counted and excluded. Unlike the error ladders, a level
/// with few survivors is reported rather than rejected, since divergence
/// counts are themselves the statistic of interest for unstable schemes.
pub fn empirical_moment_sup(
    problem: &SdeProblem,
    policy: Option<&TruncationPolicy>,
    study: &MomentStudy,
) -> Result<MomentTable> {
    let levels = validate_levels(&study.levels, study.finest_level)?;
    let t_end = study.t_end;
    let setups = levels
        .iter()
        .map(|&j| {
            let delta = t_end / (1u64 << j) as f64;
            Ok((j, delta, radius(study.scheme, policy, delta)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let d = problem.d();

    // per level: Some((|X_k|^p for all k, sup moment)) or None if diverged
    let replicate = |r: u64| -> Result<Vec<Option<(Vec<f64>, f64)>>> {
        let ladder = DyadicPathLadder::generate(t_end, study.finest_level, problem.m(), study.seed, r)?;
        let cumulative = ladder.cumulative();
        let mut inc = Vec::new();
        setups
            .iter()
            .map(|&(level, delta, h)| {
                ladder.coarsen_into(level, &mut inc)?;
                let sol = run_with_increments(problem, study.scheme, h, delta, level, &inc)?;
                if sol.diverged() {
                    return Ok(None);
                }
                let pointwise: Vec<f64> = sol.states().chunks_exact(d).map(|x| norm(x).powf(study.p)).collect();
                let path = sol.continuous_path(problem, &ladder, &cumulative)?;
                let sup = path.chunks_exact(d).map(norm).fold(0.0f64, f64::max);
                Ok(Some((pointwise, sup.powf(study.p_bar))))
            })
            .collect()
    };

    let mut sums: Vec<Vec<f64>> = setups.iter().map(|&(j, _, _)| vec![0.0; (1usize << j) + 1]).collect();
    let mut sups: Vec<Vec<f64>> = vec![Vec::new(); setups.len()];
    let mut diverged = vec![0usize; setups.len()];
    for_each_replicate(study.replicates, replicate, |outcomes| {
        for (i, o) in outcomes.into_iter().enumerate() {
            match o {
                Some((pointwise, sup)) => {
                    sums[i].iter_mut().zip(&pointwise).for_each(|(s, v)| *s += v);
                    sups[i].push(sup);
                }
                None => diverged[i] += 1,
            }
        }
        Ok(())
    })?;

    let rows = setups
        .iter()
        .enumerate()
        .map(|(i, &(level, delta, _))| {
            let n = sups[i].len();
            let max_mean_moment = if n == 0 {
                f64::INFINITY
            } else {
                sums[i].iter().map(|s| s / n as f64).fold(0.0f64, f64::max)
            };
            MomentRow {
                level,
                delta,
                max_mean_moment,
                mean_sup_moment: Estimate::from_samples(&sups[i]),
                replicates: n,
                diverged: diverged[i],
            }
        })
        .collect();
    Ok(MomentTable {
        scheme: study.scheme,
        p: study.p,
        p_bar: study.p_bar,
        rows,
    })
}

/// Interpolant-gap study for MTEM. Each level must sit strictly below the
/// finest level so the mid-cell probe lies on the fine grid.
#[derive(Debug, Clone)]
pub struct GapStudy {
    pub t_end: f64,
    pub levels: Vec<u32>,
    pub finest_level: u32,
    /// Moment exponent of the gap.
    pub p: f64,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRow {
    pub level: u32,
    pub delta: f64,
    /// `E|x_Δ(t) - x̄_Δ(t)|^p` at the middle of the last cell, `t = T - Δ/2`.
    pub fixed_time: Estimate,
    /// `E max_t |x_Δ(t) - x̄_Δ(t)|^p` over the finest grid.
    pub sup: Estimate,
    pub replicates: usize,
    pub diverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapLadder {
    pub p: f64,
    pub rows: Vec<GapRow>,
}

impl GapLadder {
    /// Fit of the fixed-time gap; the expected root-scale slope is 1/2.
    pub fn fit_fixed_time(&self) -> Result<RateFit> {
        let pts: Vec<_> = self.rows.iter().map(|r| (r.delta, r.fixed_time.mean)).collect();
        fit_rate(&pts, self.p)
    }

    /// Fit of the sup gap; expected root-scale slope `(p/2 - 1)/p`.
    pub fn fit_sup(&self) -> Result<RateFit> {
        let pts: Vec<_> = self.rows.iter().map(|r| (r.delta, r.sup.mean)).collect();
        let mut fit = fit_rate(&pts, self.p)?;
        fit.theoretical_slope = (self.p / 2.0 - 1.0) / self.p;
        Ok(fit)
    }
}

pub fn interpolant_gap(
    problem: &SdeProblem,
    policy: &TruncationPolicy,
    study: &GapStudy,
) -> Result<GapLadder> {
    let levels = validate_levels(&study.levels, study.finest_level)?;
    if let Some(&j) = levels.iter().find(|&&j| j >= study.finest_level) {
        return Err(SdeError::LevelOutOfRange {
            level: j,
            finest: study.finest_level.saturating_sub(1),
        });
    }
    let t_end = study.t_end;
    let setups = levels
        .iter()
        .map(|&j| {
            let delta = t_end / (1u64 << j) as f64;
            Ok((j, delta, policy.h(delta)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let d = problem.d();
    let p = study.p;

    let replicate = |r: u64| -> Result<Vec<Option<(f64, f64)>>> {
        let ladder = DyadicPathLadder::generate(t_end, study.finest_level, problem.m(), study.seed, r)?;
        let cumulative = ladder.cumulative();
        let mut inc = Vec::new();
        setups
            .iter()
            .map(|&(level, delta, h)| {
                ladder.coarsen_into(level, &mut inc)?;
                let sol = run_with_increments(problem, Scheme::Mtem, Some(h), delta, level, &inc)?;
                if sol.diverged() {
                    return Ok(None);
                }
                let ratio = sol.fine_ratio(&ladder)?;
                let path = sol.continuous_path(problem, &ladder, &cumulative)?;
                let gap = |i: usize| {
                    let k = (i / ratio).min(sol.steps());
                    distance(&path[i * d..(i + 1) * d], sol.state(k).expect("completed"))
                };
                let probe = ladder.len() - ratio / 2;
                let sup = (0..=ladder.len()).map(gap).fold(0.0f64, f64::max);
                Ok(Some((gap(probe).powf(p), sup.powf(p))))
            })
            .collect()
    };

    let mut cols: Vec<Vec<(f64, f64)>> = vec![Vec::new(); setups.len()];
    let mut diverged = vec![0usize; setups.len()];
    for_each_replicate(study.replicates, replicate, |outcomes| {
        for (i, o) in outcomes.into_iter().enumerate() {
            match o {
                Some(v) => cols[i].push(v),
                None => diverged[i] += 1,
            }
        }
        Ok(())
    })?;

    let mut rows = Vec::new();
    for (i, &(level, delta, _)) in setups.iter().enumerate() {
        let col = &cols[i];
        if col.len() < MIN_SURVIVORS {
            return Err(SdeError::InsufficientSample {
                level,
                survivors: col.len(),
            });
        }
        rows.push(GapRow {
            level,
            delta,
            fixed_time: Estimate::from_samples(&col.iter().map(|v| v.0).collect::<Vec<_>>()),
            sup: Estimate::from_samples(&col.iter().map(|v| v.1).collect::<Vec<_>>()),
            replicates: col.len(),
            diverged: diverged[i],
        });
    }
    Ok(GapLadder { p, rows })
}
