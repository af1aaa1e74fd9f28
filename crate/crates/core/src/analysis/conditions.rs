//! Sampled margins of the monotonicity, Khasminskii and diffusion growth
//! conditions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SdeError};
use crate::linalg::{distance, dot, norm};
use crate::margin::MarginReport;
use crate::problem::{ConditionSet, SdeProblem};
use crate::sampling;

fn check_args(radius: f64, samples: usize) -> Result<()> {
    if !(radius > 0.0) || samples == 0 {
        return Err(SdeError::InvalidParameter(
            "radius and sample count must be positive".into(),
        ));
    }
    Ok(())
}

/// Single points: even draws uniform in the ball, odd draws with
/// log-uniform radius in `[1e-3 R, R]`.
fn sample_point(rng: &mut ChaCha8Rng, i: usize, radius: f64, x: &mut [f64]) {
    if i % 2 == 0 {
        sampling::in_ball(rng, radius, x);
    } else {
        sampling::log_radius(rng, 1e-3 * radius, radius, x);
    }
}

/// Worst `[<x-y, f(x)-f(y)> + (q-1)/2 |g(x)-g(y)|^2] / (H |x-y|^2)` over
/// pairs drawn uniformly in the ball, as close neighbours, and on
/// log-uniform radii (which reaches far-apart pairs of mixed scale).
pub fn check_monotonicity_condition(
    problem: &SdeProblem,
    cond: &ConditionSet,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<MarginReport> {
    check_args(radius, samples)?;
    let d = problem.d();
    let dm = d * problem.m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
    let (mut fx, mut fy) = (vec![0.0; d], vec![0.0; d]);
    let (mut gx, mut gy) = (vec![0.0; dm], vec![0.0; dm]);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..samples {
        let sep = loop {
            match i % 3 {
                0 => {
                    sampling::in_ball(&mut rng, radius, &mut x);
                    sampling::in_ball(&mut rng, radius, &mut y);
                }
                1 => {
                    sampling::in_ball(&mut rng, radius, &mut x);
                    sampling::near(&mut rng, &x, 1.0, &mut y);
                    sampling::clamp_to_ball(radius, &mut y);
                }
                _ => {
                    sampling::log_radius(&mut rng, 1e-3 * radius, radius, &mut x);
                    sampling::log_radius(&mut rng, 1e-3 * radius, radius, &mut y);
                }
            }
            let sep = distance(&x, &y);
            if sep >= 1e-14 {
                break sep;
            }
        };
        problem.drift_into(&x, &mut fx);
        problem.drift_into(&y, &mut fy);
        problem.diffusion_into(&x, &mut gx);
        problem.diffusion_into(&y, &mut gy);
        let inner: f64 = (0..d).map(|c| (x[c] - y[c]) * (fx[c] - fy[c])).sum();
        let gdiff = distance(&gx, &gy);
        let value = inner + 0.5 * (cond.q - 1.0) * gdiff * gdiff;
        worst = worst.max(value / (cond.h * sep * sep));
    }
    Ok(MarginReport { worst, samples })
}

/// Worst `[<x, f(x)> + (p-1)/2 |g(x)|^2] / (K (1 + |x|^2))`.
pub fn check_khasminskii(
    problem: &SdeProblem,
    cond: &ConditionSet,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<MarginReport> {
    check_args(radius, samples)?;
    let d = problem.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; d];
    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d * problem.m()];
    let mut worst = f64::NEG_INFINITY;
    for i in 0..samples {
        sample_point(&mut rng, i, radius, &mut x);
        problem.drift_into(&x, &mut f);
        problem.diffusion_into(&x, &mut g);
        let value = dot(&x, &f) + 0.5 * (cond.p - 1.0) * dot(&g, &g);
        worst = worst.max(value / (cond.k * (1.0 + dot(&x, &x))));
    }
    Ok(MarginReport { worst, samples })
}

/// Worst `|g(x)|^2 / (K̄ (1 + |x|^r))`. Needs `r` and `K̄` in `cond`.
pub fn check_diffusion_growth(
    problem: &SdeProblem,
    cond: &ConditionSet,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<MarginReport> {
    check_args(radius, samples)?;
    let (Some(r), Some(k_bar)) = (cond.r, cond.k_bar) else {
        return Err(SdeError::InvalidParameter(
            "diffusion growth check needs r and K̄".into(),
        ));
    };
    let d = problem.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; d * problem.m()];
    let mut worst = f64::NEG_INFINITY;
    for i in 0..samples {
        sample_point(&mut rng, i, radius, &mut x);
        problem.diffusion_into(&x, &mut g);
        worst = worst.max(dot(&g, &g) / (k_bar * (1.0 + norm(&x).powf(r))));
    }
    Ok(MarginReport { worst, samples })
}
