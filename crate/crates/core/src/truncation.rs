//! Coefficient truncation and the step-size dependent truncation radius.
//!
//! The modified map keeps `f` on the ball `|x| <= h(Δ)` and extends it
//! radially and linearly outside, `f_Δ(x) = (|x|/h) f(h x/|x|)`. The Mao
//! baseline clamps the argument instead, so its output stays bounded.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, SdeError};
use crate::linalg::{distance, dot, norm};
use crate::margin::{MarginReport, MARGIN_TOLERANCE};
use crate::problem::{ConditionSet, SdeProblem};
use crate::sampling;

/// Which truncation map to apply outside the ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Truncation {
    /// Radially rescaled boundary value (unbounded, globally Lipschitz).
    Modified,
    /// Argument clamped onto the sphere (bounded).
    Mao,
}

/// Evaluates `eval` through the chosen truncation. `projected` is scratch
/// space of the state's length.
#[inline]
pub fn truncate_into<F>(
    kind: Truncation,
    eval: F,
    h_delta: f64,
    x: &[f64],
    projected: &mut [f64],
    out: &mut [f64],
) where
    F: Fn(&[f64], &mut [f64]),
{
    let r = norm(x);
    if r <= h_delta {
        eval(x, out);
        return;
    }
    let s = h_delta / r;
    for (p, xi) in projected.iter_mut().zip(x) {
        *p = s * xi;
    }
    eval(projected, out);
    if kind == Truncation::Modified {
        let scale = r / h_delta;
        out.iter_mut().for_each(|v| *v *= scale);
    }
}

/// `f_Δ(x)`: `eval(x)` inside the ball, `(|x|/h) eval(h x/|x|)` outside.
pub fn truncate_modified<F>(eval: F, h_delta: f64, x: &[f64], out_len: usize) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut out = vec![0.0; out_len];
    let mut projected = vec![0.0; x.len()];
    truncate_into(Truncation::Modified, eval, h_delta, x, &mut projected, &mut out);
    out
}

/// Mao's bounded truncation: `eval(x)` inside the ball, `eval(h x/|x|)` outside.
pub fn truncate_mao<F>(eval: F, h_delta: f64, x: &[f64], out_len: usize) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut out = vec![0.0; out_len];
    let mut projected = vec![0.0; x.len()];
    truncate_into(Truncation::Mao, eval, h_delta, x, &mut projected, &mut out);
    out
}

/// Search bracket for inverting `l`.
pub const RADIUS_BRACKET: (f64, f64) = (1e-6, 1e12);
const MAX_BISECTIONS: usize = 200;

/// Solves `log_l(R) = target` for a strictly decreasing `log_l` by bisection
/// in `ln R` over [`RADIUS_BRACKET`]. Iterates until the bracket stops
/// shrinking in floating point, so the relative error in `R` is at the
/// rounding level.
pub fn invert_decreasing<F>(log_l: F, target: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut lo = RADIUS_BRACKET.0.ln();
    let mut hi = RADIUS_BRACKET.1.ln();
    let phi = |u: f64| log_l(u.exp()) - target;
    let (at_lo, at_hi) = (phi(lo), phi(hi));
    if at_lo.is_nan() || at_hi.is_nan() || at_lo <= 0.0 || at_hi >= 0.0 {
        return Err(SdeError::ProfileNotInvertible);
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = phi(mid);
        if v.is_nan() {
            return Err(SdeError::ProfileNotInvertible);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// The truncation radius `Δ -> h(Δ)` on `(0, Δ*]`.
#[derive(Clone)]
pub struct TruncationPolicy {
    radius: Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>,
    delta_star: f64,
    description: String,
}

impl fmt::Debug for TruncationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruncationPolicy")
            .field("delta_star", &self.delta_star)
            .field("description", &self.description)
            .finish()
    }
}

impl TruncationPolicy {
    /// Policy from an explicit radius function.
    pub fn new(
        description: impl Into<String>,
        delta_star: f64,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            radius: Arc::new(move |delta| Ok(h(delta))),
            delta_star,
            description: description.into(),
        }
    }

    /// Policy whose radius is the inverse of a strictly decreasing `l`,
    /// given through `ln l(R)`.
    pub fn inverse_of(
        description: impl Into<String>,
        delta_star: f64,
        log_l: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(delta_star > 0.0) {
            return Err(SdeError::InvalidParameter("Δ* must be positive".into()));
        }
        let log_l = Arc::new(log_l);
        let policy = Self {
            radius: Arc::new(move |delta: f64| invert_decreasing(&*log_l, delta.ln())),
            delta_star,
            description: description.into(),
        };
        policy.h(delta_star)?;
        Ok(policy)
    }

    /// `h(Δ)`; errors outside `(0, Δ*]`.
    pub fn h(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta <= self.delta_star) {
            return Err(SdeError::StepOutsideDomain {
                delta,
                delta_star: self.delta_star,
            });
        }
        let h = (self.radius)(delta)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(SdeError::InvalidParameter(format!(
                "truncation radius {h} at Δ = {delta} is not positive and finite"
            )));
        }
        Ok(h)
    }

    pub fn delta_star(&self) -> f64 {
        self.delta_star
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

/// `h` as the inverse of `l(R) = 1 / (R L_R^4)`, so that
/// `L_{h(Δ)}^4 Δ = 1 / h(Δ)`.
pub fn build_h_from_profile(
    profile: impl Fn(f64) -> f64 + Send + Sync + 'static,
    delta_star: f64,
) -> Result<TruncationPolicy> {
    TruncationPolicy::inverse_of(
        "inverse of l(R) = 1/(R L_R^4)",
        delta_star,
        move |r| -r.ln() - 4.0 * profile(r).ln(),
    )
}

/// Pass flag with the number it was decided on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub pass: bool,
    pub margin: f64,
}

/// Step-size admissibility diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Admissibility {
    pub delta: f64,
    pub h_delta: f64,
    /// `L_{h(Δ)}`
    pub lipschitz_at_h: f64,
    /// `|f(0)| <= h(Δ)`; margin `h(Δ) - |f(0)|`.
    pub f0_within_radius: Check,
    /// `L_{h(Δ)} >= 1`; margin `L_{h(Δ)} - 1`.
    pub lipschitz_at_least_one: Check,
    /// `h(Δ) >= (L^{2q} Δ^{q/2})^{-1/(p-q)}`; margin is the ratio of the two
    /// sides, passing at `>= 1` up to rounding.
    pub radius_bound: Check,
    /// `L_{h(Δ)}^4 Δ`; passes while below one.
    pub l4_delta: Check,
}

impl Admissibility {
    /// All four checks pass.
    pub fn theorem_covered(&self) -> bool {
        self.f0_within_radius.pass
            && self.lipschitz_at_least_one.pass
            && self.radius_bound.pass
            && self.l4_delta.pass
    }
}

pub fn check_step_admissible(
    problem: &SdeProblem,
    policy: &TruncationPolicy,
    cond: &ConditionSet,
    delta: f64,
) -> Result<Admissibility> {
    let h_delta = policy.h(delta)?;
    let l = problem.lipschitz(h_delta);
    let (p, q) = (cond.p, cond.q);
    // ln of (L^{2q} Δ^{q/2})^{-1/(p-q)}
    let log_bound = -(2.0 * q * l.ln() + 0.5 * q * delta.ln()) / (p - q);
    let ratio = (h_delta.ln() - log_bound).exp();
    let l4_delta = (4.0 * l.ln() + delta.ln()).exp();
    Ok(Admissibility {
        delta,
        h_delta,
        lipschitz_at_h: l,
        f0_within_radius: Check {
            pass: problem.f0_norm() <= h_delta,
            margin: h_delta - problem.f0_norm(),
        },
        lipschitz_at_least_one: Check {
            pass: l >= 1.0,
            margin: l - 1.0,
        },
        radius_bound: Check {
            pass: ratio >= 1.0 - MARGIN_TOLERANCE,
            margin: ratio,
        },
        l4_delta: Check {
            pass: l4_delta < 1.0,
            margin: l4_delta,
        },
    })
}

/// Worst sampled ratios `|f_Δ(x) - f_Δ(y)| / (4 L_{h(Δ)} |x - y|)` and the
/// same for `g_Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedLipschitzReport {
    pub h_delta: f64,
    pub bound: f64,
    pub drift_ratio: f64,
    pub diffusion_ratio: f64,
    pub samples: usize,
}

impl TruncatedLipschitzReport {
    pub fn holds(&self) -> bool {
        self.drift_ratio <= 1.0 + MARGIN_TOLERANCE && self.diffusion_ratio <= 1.0 + MARGIN_TOLERANCE
    }
}

/// Samples pairs from the three geometric cases (both inside the ball, both
/// in the shell `[h, 3h]`, one in each) in rotation.
pub fn check_truncated_lipschitz(
    problem: &SdeProblem,
    policy: &TruncationPolicy,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<TruncatedLipschitzReport> {
    let h = policy.h(delta)?;
    let bound = 4.0 * problem.lipschitz(h);
    let d = problem.d();
    let dm = d * problem.m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut y, mut scratch) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let (mut fx, mut fy) = (vec![0.0; d], vec![0.0; d]);
    let (mut gx, mut gy) = (vec![0.0; dm], vec![0.0; dm]);
    let (mut drift_ratio, mut diffusion_ratio) = (0.0f64, 0.0f64);
    let drift = |x: &[f64], out: &mut [f64]| problem.drift_into(x, out);
    let diffusion = |x: &[f64], out: &mut [f64]| problem.diffusion_into(x, out);
    for i in 0..samples {
        let sep = loop {
            match i % 3 {
                0 => {
                    sampling::in_ball(&mut rng, h, &mut x);
                    sampling::in_ball(&mut rng, h, &mut y);
                }
                1 => {
                    sampling::in_shell(&mut rng, h, 3.0 * h, &mut x);
                    sampling::in_shell(&mut rng, h, 3.0 * h, &mut y);
                }
                _ => {
                    sampling::in_ball(&mut rng, h, &mut x);
                    sampling::in_shell(&mut rng, h, 3.0 * h, &mut y);
                }
            }
            let sep = distance(&x, &y);
            if sep >= 1e-14 {
                break sep;
            }
        };
        let m = Truncation::Modified;
        truncate_into(m, drift, h, &x, &mut scratch, &mut fx);
        truncate_into(m, drift, h, &y, &mut scratch, &mut fy);
        truncate_into(m, diffusion, h, &x, &mut scratch, &mut gx);
        truncate_into(m, diffusion, h, &y, &mut scratch, &mut gy);
        drift_ratio = drift_ratio.max(distance(&fx, &fy) / (bound * sep));
        diffusion_ratio = diffusion_ratio.max(distance(&gx, &gy) / (bound * sep));
    }
    Ok(TruncatedLipschitzReport {
        h_delta: h,
        bound,
        drift_ratio,
        diffusion_ratio,
        samples,
    })
}

/// Worst sampled `[<x, f_Δ(x)> + (p-1)/2 |g_Δ(x)|^2] / (2K(1 + |x|^2))`.
/// Half the samples are uniform in `|x| <= 3h`, half have log-uniform
/// radius in `[h, 10^4 h]`.
pub fn check_truncated_khasminskii(
    problem: &SdeProblem,
    policy: &TruncationPolicy,
    cond: &ConditionSet,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<MarginReport> {
    let h = policy.h(delta)?;
    let d = problem.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut scratch) = (vec![0.0; d], vec![0.0; d]);
    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d * problem.m()];
    let mut worst = f64::NEG_INFINITY;
    for i in 0..samples {
        if i % 2 == 0 {
            let r = rng.random_range(0.0..=3.0 * h);
            sampling::on_sphere(&mut rng, r, &mut x);
        } else {
            sampling::log_radius(&mut rng, h, 1e4 * h, &mut x);
        }
        let m = Truncation::Modified;
        truncate_into(m, |x: &[f64], o: &mut [f64]| problem.drift_into(x, o), h, &x, &mut scratch, &mut f);
        truncate_into(m, |x: &[f64], o: &mut [f64]| problem.diffusion_into(x, o), h, &x, &mut scratch, &mut g);
        let g2 = dot(&g, &g);
        let value = dot(&x, &f) + 0.5 * (cond.p - 1.0) * g2;
        worst = worst.max(value / (2.0 * cond.k * (1.0 + dot(&x, &x))));
    }
    Ok(MarginReport { worst, samples })
}
