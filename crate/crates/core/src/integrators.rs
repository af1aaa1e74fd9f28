//! The MTEM recursion `X_{k+1} = X_k + f_Δ(X_k) Δ + g_Δ(X_k) ΔB_k`, plain
//! Euler-Maruyama and Mao's truncated EM, all driven by a shared ladder.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::brownian::DyadicPathLadder;
use crate::error::{Result, SdeError};
use crate::linalg::{mat_vec_add, norm};
use crate::problem::SdeProblem;
use crate::truncation::{truncate_into, Truncation, TruncationPolicy};

/// States with a larger norm count as diverged.
pub const OVERFLOW_GUARD: f64 = 1e154;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Modified truncated EM.
    Mtem,
    /// Plain Euler-Maruyama.
    Em,
    /// Mao's truncated EM (bounded truncation).
    Tem,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Mtem => "mtem",
            Scheme::Em => "em",
            Scheme::Tem => "tem",
        }
    }

    fn truncation(self) -> Option<Truncation> {
        match self {
            Scheme::Mtem => Some(Truncation::Modified),
            Scheme::Tem => Some(Truncation::Mao),
            Scheme::Em => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = SdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mtem" => Ok(Scheme::Mtem),
            "em" => Ok(Scheme::Em),
            "tem" | "tem-baseline" => Ok(Scheme::Tem),
            other => Err(SdeError::InvalidParameter(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Evaluates the (possibly truncated) coefficients of one scheme into
/// reusable buffers.
pub struct Coefficients<'a> {
    problem: &'a SdeProblem,
    truncation: Option<(Truncation, f64)>,
    projected: Vec<f64>,
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
}

impl<'a> Coefficients<'a> {
    pub fn new(problem: &'a SdeProblem, scheme: Scheme, h_delta: Option<f64>) -> Result<Self> {
        let truncation = match (scheme.truncation(), h_delta) {
            (None, _) => None,
            (Some(kind), Some(h)) if h > 0.0 => Some((kind, h)),
            (Some(_), _) => {
                return Err(SdeError::InvalidParameter(format!(
                    "scheme {scheme} needs a positive truncation radius"
                )))
            }
        };
        let d = problem.d();
        Ok(Self {
            problem,
            truncation,
            projected: vec![0.0; d],
            drift: vec![0.0; d],
            diffusion: vec![0.0; d * problem.m()],
        })
    }

    /// Fills `self.drift` and `self.diffusion` at `x`.
    #[inline]
    pub fn eval(&mut self, x: &[f64]) {
        let p = self.problem;
        match self.truncation {
            None => {
                p.drift_into(x, &mut self.drift);
                p.diffusion_into(x, &mut self.diffusion);
            }
            Some((kind, h)) => {
                let drift = |y: &[f64], o: &mut [f64]| p.drift_into(y, o);
                let diffusion = |y: &[f64], o: &mut [f64]| p.diffusion_into(y, o);
                truncate_into(kind, drift, h, x, &mut self.projected, &mut self.drift);
                truncate_into(kind, diffusion, h, x, &mut self.projected, &mut self.diffusion);
            }
        }
    }

    /// `out = x + drift * dt + diffusion * db` using the last evaluation.
    #[inline]
    pub fn advance(&self, x: &[f64], dt: f64, db: &[f64], out: &mut [f64]) {
        for ((o, xi), fi) in out.iter_mut().zip(x).zip(&self.drift) {
            *o = xi + fi * dt;
        }
        mat_vec_add(&self.diffusion, self.problem.m(), db, out);
    }
}

/// One MTEM step from `x` with increment `db`.
pub fn mtem_step(
    problem: &SdeProblem,
    x: &[f64],
    delta: f64,
    h_delta: f64,
    db: &[f64],
) -> Result<Vec<f64>> {
    step(problem, Scheme::Mtem, Some(h_delta), x, delta, db)
}

/// One step of any scheme. Non-finite output is returned as is.
pub fn step(
    problem: &SdeProblem,
    scheme: Scheme,
    h_delta: Option<f64>,
    x: &[f64],
    delta: f64,
    db: &[f64],
) -> Result<Vec<f64>> {
    if x.len() != problem.d() || db.len() != problem.m() {
        return Err(SdeError::Dimension {
            expected: problem.d(),
            got: x.len(),
        });
    }
    let mut coeffs = Coefficients::new(problem, scheme, h_delta)?;
    coeffs.eval(x);
    let mut out = vec![0.0; problem.d()];
    coeffs.advance(x, delta, db, &mut out);
    Ok(out)
}

/// Discrete trajectory `X_0 .. X_N` on a dyadic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub scheme: Scheme,
    pub delta: f64,
    pub level: u32,
    pub h_delta: Option<f64>,
    d: usize,
    steps: usize,
    /// Row-major `(N + 1) x d`, truncated at the first diverged state.
    states: Vec<f64>,
    pub diverged_at: Option<usize>,
}

/// Runs `scheme` at step `delta` along the ladder. `policy` is required
/// for the truncated schemes and ignored for EM.
pub fn run(
    problem: &SdeProblem,
    policy: Option<&TruncationPolicy>,
    scheme: Scheme,
    delta: f64,
    ladder: &DyadicPathLadder,
) -> Result<GridSolution> {
    let level = ladder.level_of(delta)?;
    let h_delta = match (scheme, policy) {
        (Scheme::Em, _) => None,
        (_, Some(policy)) => Some(policy.h(delta)?),
        (_, None) => {
            return Err(SdeError::InvalidParameter(format!(
                "scheme {scheme} needs a truncation policy"
            )))
        }
    };
    let increments = ladder.coarsen(level)?;
    run_with_increments(problem, scheme, h_delta, delta, level, &increments)
}

/// As [`run`] with precomputed level increments (row-major `N x m`).
pub fn run_with_increments(
    problem: &SdeProblem,
    scheme: Scheme,
    h_delta: Option<f64>,
    delta: f64,
    level: u32,
    increments: &[f64],
) -> Result<GridSolution> {
    let (d, m) = (problem.d(), problem.m());
    let steps = 1usize << level;
    if increments.len() != steps * m {
        return Err(SdeError::Dimension {
            expected: steps * m,
            got: increments.len(),
        });
    }
    let mut coeffs = Coefficients::new(problem, scheme, h_delta)?;
    let mut states = Vec::with_capacity((steps + 1) * d);
    states.extend_from_slice(problem.x0());
    let mut next = vec![0.0; d];
    let mut diverged_at = None;
    for (k, db) in increments.chunks_exact(m).enumerate() {
        let x = &states[k * d..(k + 1) * d];
        coeffs.eval(x);
        coeffs.advance(x, delta, db, &mut next);
        let n = norm(&next);
        if !n.is_finite() || n > OVERFLOW_GUARD {
            diverged_at = Some(k + 1);
            break;
        }
        states.extend_from_slice(&next);
    }
    Ok(GridSolution {
        scheme,
        delta,
        level,
        h_delta,
        d,
        steps,
        states,
        diverged_at,
    })
}

impl GridSolution {
    /// Number of steps `N = T / Δ`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// Number of stored states (`N + 1` unless diverged).
    pub fn stored(&self) -> usize {
        self.states.len() / self.d
    }

    pub fn state(&self, k: usize) -> Option<&[f64]> {
        self.states.get(k * self.d..(k + 1) * self.d)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    /// `X_N`, if the run completed.
    pub fn terminal(&self) -> Option<&[f64]> {
        if self.diverged() {
            None
        } else {
            self.state(self.steps)
        }
    }

    fn cell(&self, t: f64) -> Result<usize> {
        let t_end = self.delta * self.steps as f64;
        if !(t >= 0.0 && t <= t_end) {
            return Err(SdeError::TimeOutOfRange { t, t_end });
        }
        let k = ((t / self.delta).floor() as usize).min(self.steps);
        if k >= self.stored() {
            return Err(SdeError::Diverged(self.diverged_at.unwrap_or(k)));
        }
        Ok(k)
    }

    /// Step process: `X_k` for `kΔ <= t < (k+1)Δ`, and `X_N` at `t = T`.
    pub fn step_process_value(&self, t: f64) -> Result<Vec<f64>> {
        let k = self.cell(t)?;
        Ok(self.state(k).expect("checked by cell").to_vec())
    }

    /// Continuous interpolant `X_k + f_Δ(X_k)(t - kΔ) + g_Δ(X_k)(B(t) - B(kΔ))`
    /// with `t` snapped to the ladder's finest grid.
    pub fn continuous_value(
        &self,
        problem: &SdeProblem,
        ladder: &DyadicPathLadder,
        t: f64,
    ) -> Result<Vec<f64>> {
        let i = ladder.snap(t)?;
        let ratio = self.fine_ratio(ladder)?;
        let k = (i / ratio).min(self.steps);
        if k >= self.stored() {
            return Err(SdeError::Diverged(self.diverged_at.unwrap_or(k)));
        }
        let x = self.state(k).expect("in range");
        let offset = i - k * ratio;
        if offset == 0 {
            return Ok(x.to_vec());
        }
        let mut coeffs = Coefficients::new(problem, self.scheme, self.h_delta)?;
        coeffs.eval(x);
        let b_t = ladder.bridge_value(t)?;
        let b_k = ladder.bridge_value(k as f64 * self.delta)?;
        let db: Vec<f64> = b_t.iter().zip(&b_k).map(|(a, b)| a - b).collect();
        let mut out = vec![0.0; self.d];
        coeffs.advance(x, offset as f64 * ladder.delta_min(), &db, &mut out);
        Ok(out)
    }

    /// Number of finest ladder cells per step.
    pub fn fine_ratio(&self, ladder: &DyadicPathLadder) -> Result<usize> {
        if self.level > ladder.finest_level() || ladder.step(self.level) != self.delta {
            return Err(SdeError::StepNotDyadic(self.delta));
        }
        Ok(1usize << (ladder.finest_level() - self.level))
    }

    /// Continuous interpolant at every finest grid point, given the
    /// cumulative path `B` from [`DyadicPathLadder::cumulative`]. Row-major
    /// `(len + 1) x d`. Requires a completed run.
    pub fn continuous_path(
        &self,
        problem: &SdeProblem,
        ladder: &DyadicPathLadder,
        cumulative: &[f64],
    ) -> Result<Vec<f64>> {
        if let Some(k) = self.diverged_at {
            return Err(SdeError::Diverged(k));
        }
        let ratio = self.fine_ratio(ladder)?;
        let (d, m) = (self.d, problem.m());
        let dt_min = ladder.delta_min();
        let mut coeffs = Coefficients::new(problem, self.scheme, self.h_delta)?;
        let mut out = vec![0.0; (ladder.len() + 1) * d];
        let mut db = vec![0.0; m];
        for k in 0..self.steps {
            let x = self.state(k).expect("completed run");
            let start = k * ratio;
            out[start * d..(start + 1) * d].copy_from_slice(x);
            if ratio == 1 {
                continue;
            }
            coeffs.eval(x);
            let b0 = &cumulative[start * m..(start + 1) * m];
            for off in 1..ratio {
                let i = start + off;
                let bi = &cumulative[i * m..(i + 1) * m];
                for ((o, a), b) in db.iter_mut().zip(bi).zip(b0) {
                    *o = a - b;
                }
                coeffs.advance(x, off as f64 * dt_min, &db, &mut out[i * d..(i + 1) * d]);
            }
        }
        let last = ladder.len();
        out[last * d..].copy_from_slice(self.state(self.steps).expect("completed run"));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truncation::build_h_from_profile;

    fn scalar(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        x0: f64,
    ) -> SdeProblem {
        SdeProblem::new("scalar", 1, 1, vec![x0], move |x, o| o[0] = f(x[0]), move |x, o| o[0] = g(x[0]), |_| 1.0)
            .unwrap()
    }

    #[test]
    fn frozen_dynamics_do_not_move() {
        let p = scalar(|_| 0.0, |_| 0.0, 0.7);
        assert_eq!(mtem_step(&p, &[0.7], 0.1, 1.0, &[0.3]).unwrap(), vec![0.7]);
    }

    #[test]
    fn pure_noise_step() {
        let p = scalar(|_| 0.0, |_| 1.0, 0.0);
        assert_eq!(mtem_step(&p, &[0.0], 0.1, 1.0, &[0.1]).unwrap(), vec![0.1]);
    }

    #[test]
    fn example2_outside_ball_step() {
        let p = scalar(|x| x - x * x * x, |x| x.abs().powf(1.5), 1.0);
        let got = mtem_step(&p, &[4.0], 0.01, 2.0, &[0.1]).unwrap()[0];
        // g_Δ(4) = 2 * 2^{3/2} = 2^{5/2}
        let expect = 4.0 + (-12.0) * 0.01 + 2f64.powf(2.5) * 0.1;
        assert!((got - expect).abs() < 1e-14, "{got} vs {expect}");
        assert!((got - 4.445685).abs() < 1e-6);
    }

    #[test]
    fn single_step_run_matches_step() {
        let p = scalar(|x| x - x * x * x, |x| x.abs().powf(1.5), 1.5);
        let policy = build_h_from_profile(|r| 3.0 * r * r + 1.0, 1.0).unwrap();
        let ladder = DyadicPathLadder::generate(1.0, 3, 1, 9, 0).unwrap();
        for scheme in [Scheme::Mtem, Scheme::Em, Scheme::Tem] {
            let sol = run(&p, Some(&policy), scheme, 1.0, &ladder).unwrap();
            let h = sol.h_delta;
            let db = ladder.coarsen(0).unwrap();
            let direct = step(&p, scheme, h, &[1.5], 1.0, &db).unwrap();
            assert_eq!(sol.state(1).unwrap(), &direct[..], "{scheme}");
        }
    }

    #[test]
    fn non_dyadic_step_rejected() {
        let p = scalar(|_| 0.0, |_| 0.0, 0.0);
        let ladder = DyadicPathLadder::generate(1.0, 4, 1, 0, 0).unwrap();
        assert!(matches!(
            run(&p, None, Scheme::Em, 0.3, &ladder),
            Err(SdeError::StepNotDyadic(_))
        ));
        assert!(run(&p, None, Scheme::Mtem, 0.5, &ladder).is_err());
    }

    #[test]
    fn linear_sde_mtem_equals_em_inside_ball() {
        let p = scalar(|x| 0.5 * x, |x| 0.3 * x, 1.0);
        let policy = TruncationPolicy::new("wide", 1.0, |_| 1e6);
        let ladder = DyadicPathLadder::generate(1.0, 8, 1, 1, 3).unwrap();
        let a = run(&p, Some(&policy), Scheme::Mtem, 1.0 / 256.0, &ladder).unwrap();
        let b = run(&p, None, Scheme::Em, 1.0 / 256.0, &ladder).unwrap();
        assert_eq!(a.states(), b.states());
    }

    #[test]
    fn divergence_is_recorded_not_thrown() {
        let p = scalar(|x| x * x * x * x, |_| 0.0, 10.0);
        let ladder = DyadicPathLadder::generate(1.0, 4, 1, 0, 0).unwrap();
        let sol = run(&p, None, Scheme::Em, 1.0 / 16.0, &ladder).unwrap();
        let k = sol.diverged_at.expect("blows up");
        assert_eq!(sol.stored(), k);
        assert!(sol.terminal().is_none());
        assert!(matches!(sol.step_process_value(1.0), Err(SdeError::Diverged(_))));
        assert!(sol.step_process_value(0.0).is_ok());
    }

    #[test]
    fn step_process_readout() {
        let p = scalar(|x| -x, |_| 0.5, 1.0);
        let ladder = DyadicPathLadder::generate(1.0, 6, 1, 2, 0).unwrap();
        let sol = run(&p, None, Scheme::Em, 0.25, &ladder).unwrap();
        assert_eq!(sol.step_process_value(0.5).unwrap(), sol.state(2).unwrap());
        assert_eq!(sol.step_process_value(0.625).unwrap(), sol.state(2).unwrap());
        assert_eq!(sol.step_process_value(1.0).unwrap(), sol.state(4).unwrap());
        assert!(sol.step_process_value(1.1).is_err());
    }

    #[test]
    fn continuous_readout_on_grid_is_exact() {
        let p = scalar(|x| x - x * x * x, |x| x.abs().powf(1.5), 1.0);
        let policy = build_h_from_profile(|r| 3.0 * r * r + 1.0, 1.0).unwrap();
        let ladder = DyadicPathLadder::generate(1.0, 10, 1, 4, 2).unwrap();
        let sol = run(&p, Some(&policy), Scheme::Mtem, 1.0 / 64.0, &ladder).unwrap();
        let cum = ladder.cumulative();
        let path = sol.continuous_path(&p, &ladder, &cum).unwrap();
        for k in 0..=64 {
            let t = k as f64 / 64.0;
            let v = sol.continuous_value(&p, &ladder, t).unwrap();
            assert_eq!(v[0].to_bits(), sol.state(k).unwrap()[0].to_bits());
            assert_eq!(path[k * 16].to_bits(), v[0].to_bits());
        }
        // off-grid agreement between the two readouts
        for i in [1usize, 5, 17, 1023] {
            let t = i as f64 / 1024.0;
            let v = sol.continuous_value(&p, &ladder, t).unwrap();
            assert!((v[0] - path[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_drift_interpolation() {
        let p = scalar(|_| 1.0, |_| 0.0, 0.2);
        let ladder = DyadicPathLadder::generate(1.0, 4, 1, 0, 0).unwrap();
        let sol = run(&p, None, Scheme::Em, 0.5, &ladder).unwrap();
        let v = sol.continuous_value(&p, &ladder, 0.25).unwrap()[0];
        assert!((v - 0.45).abs() < 1e-15);
        let frozen = scalar(|_| 0.0, |_| 0.0, 0.2);
        let sol = run(&frozen, None, Scheme::Em, 0.5, &ladder).unwrap();
        for i in 0..=16 {
            let v = sol.continuous_value(&frozen, &ladder, i as f64 / 16.0).unwrap();
            assert_eq!(v, vec![0.2]);
        }
    }

    #[test]
    fn matrix_diffusion_multiplies_increment() {
        // d = 2, m = 2 rotation-like diffusion
        let p = SdeProblem::new(
            "rot",
            2,
            2,
            vec![1.0, 0.0],
            |_, o| o.iter_mut().for_each(|v| *v = 0.0),
            |_, o| o.copy_from_slice(&[0.0, -1.0, 1.0, 0.0]),
            |_| 1.0,
        )
        .unwrap();
        let out = step(&p, Scheme::Em, None, &[1.0, 0.0], 0.1, &[0.2, 0.3]).unwrap();
        assert_eq!(out, vec![1.0 - 0.3, 0.2]);
    }
}
