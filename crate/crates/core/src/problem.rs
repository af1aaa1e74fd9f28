//! SDE problem definitions and the structural-condition parameter set.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SdeError};
use crate::linalg::{distance, norm};
use crate::sampling;

/// In-place coefficient evaluation: reads a state of length `d`, writes the
/// drift (`d` entries) or the row-major diffusion (`d * m` entries).
pub type Coefficient = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Declared local Lipschitz constant `R -> L_R`.
pub type LipschitzProfile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Autonomous SDE `dX = f(X) dt + g(X) dB` with a declared local Lipschitz
/// profile. Immutable once built; cheap to clone.
#[derive(Clone)]
pub struct SdeProblem {
    name: String,
    d: usize,
    m: usize,
    drift: Coefficient,
    diffusion: Coefficient,
    x0: Vec<f64>,
    lipschitz: LipschitzProfile,
    f0_norm: f64,
    g0_norm: f64,
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("m", &self.m)
            .field("x0", &self.x0)
            .field("f0_norm", &self.f0_norm)
            .field("g0_norm", &self.g0_norm)
            .finish()
    }
}

impl SdeProblem {
    pub fn new(
        name: impl Into<String>,
        d: usize,
        m: usize,
        x0: Vec<f64>,
        drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        lipschitz: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if d == 0 || m == 0 {
            return Err(SdeError::InvalidParameter(
                "state and noise dimensions must be positive".into(),
            ));
        }
        if x0.len() != d {
            return Err(SdeError::Dimension {
                expected: d,
                got: x0.len(),
            });
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(SdeError::NonFiniteState);
        }
        let mut problem = Self {
            name: name.into(),
            d,
            m,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            x0,
            lipschitz: Arc::new(lipschitz),
            f0_norm: 0.0,
            g0_norm: 0.0,
        };
        let origin = vec![0.0; d];
        problem.f0_norm = norm(&problem.drift(&origin));
        problem.g0_norm = norm(&problem.diffusion(&origin));
        if !problem.f0_norm.is_finite() || !problem.g0_norm.is_finite() {
            return Err(SdeError::InvalidParameter(
                "coefficients must be finite at the origin".into(),
            ));
        }
        Ok(problem)
    }

    /// Same coefficients, different initial state.
    pub fn with_x0(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.d {
            return Err(SdeError::Dimension {
                expected: self.d,
                got: x0.len(),
            });
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    /// `|f(0)|`
    pub fn f0_norm(&self) -> f64 {
        self.f0_norm
    }

    /// `|g(0)|`
    pub fn g0_norm(&self) -> f64 {
        self.g0_norm
    }

    pub fn lipschitz(&self, radius: f64) -> f64 {
        (self.lipschitz)(radius)
    }

    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    #[inline]
    pub fn diffusion_into(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.drift_into(x, &mut out);
        out
    }

    /// Row-major `d x m` diffusion matrix.
    pub fn diffusion(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d * self.m];
        self.diffusion_into(x, &mut out);
        out
    }
}

/// Structural constants of the monotonicity, Khasminskii and diffusion
/// growth conditions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConditionSet {
    /// Moment exponent, `2 < p <= 6`.
    pub p: f64,
    /// Error exponent, `2 < q < p`.
    pub q: f64,
    /// Diffusion growth exponent `r`, required for sup-norm rates.
    pub r: Option<f64>,
    /// Khasminskii constant `K`.
    pub k: f64,
    /// One-sided Lipschitz constant `H`.
    pub h: f64,
    /// Diffusion growth constant `K̄`.
    pub k_bar: Option<f64>,
}

impl ConditionSet {
    pub fn new(p: f64, q: f64, k: f64, h: f64) -> Result<Self> {
        let set = Self {
            p,
            q,
            r: None,
            k,
            h,
            k_bar: None,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn with_diffusion_growth(mut self, r: f64, k_bar: f64) -> Result<Self> {
        self.r = Some(r);
        self.k_bar = Some(k_bar);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SdeError::InvalidParameter(msg));
        if !(self.q > 2.0 && self.q < self.p && self.p <= 6.0) {
            return bad(format!(
                "exponents must satisfy 2 < q < p <= 6 (q = {}, p = {})",
                self.q, self.p
            ));
        }
        if !(self.k > 0.0 && self.h > 0.0) {
            return bad("K and H must be positive".into());
        }
        match (self.r, self.k_bar) {
            (None, None) => Ok(()),
            (Some(r), Some(k_bar)) => {
                if !(k_bar > 0.0) {
                    return bad("K̄ must be positive".into());
                }
                if !(r >= 2.0 && r < self.p && self.q <= self.p + 2.0 - r) {
                    return bad(format!(
                        "r = {r} must satisfy 2 <= r < p and q <= p + 2 - r"
                    ));
                }
                Ok(())
            }
            _ => bad("r and K̄ must be given together".into()),
        }
    }

    /// `p̄ = 2 + p - r`, the sup-moment exponent; `p` when `r` is absent.
    pub fn sup_moment_exponent(&self) -> f64 {
        self.r.map_or(self.p, |r| 2.0 + self.p - r)
    }
}

/// Worst observed ratios `|f(x) - f(y)| / (L_R |x - y|)` (and the same for
/// `g`) over sampled pairs in the ball of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LipschitzReport {
    pub radius: f64,
    pub declared: f64,
    pub drift_ratio: f64,
    pub diffusion_ratio: f64,
    pub samples: usize,
}

impl LipschitzReport {
    pub fn consistent(&self) -> bool {
        self.drift_ratio <= 1.0 + 1e-9 && self.diffusion_ratio <= 1.0 + 1e-9
    }
}

/// Samples pairs uniformly from the closed ball of radius `radius` and
/// reports the worst Lipschitz ratio against the declared `L_R`.
pub fn check_local_lipschitz(
    problem: &SdeProblem,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<LipschitzReport> {
    if !(radius > 0.0) || samples == 0 {
        return Err(SdeError::InvalidParameter(
            "radius and sample count must be positive".into(),
        ));
    }
    let declared = problem.lipschitz(radius);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = problem.d();
    let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
    let (mut fx, mut fy) = (vec![0.0; d], vec![0.0; d]);
    let dm = d * problem.m();
    let (mut gx, mut gy) = (vec![0.0; dm], vec![0.0; dm]);
    let (mut drift_ratio, mut diffusion_ratio) = (0.0f64, 0.0f64);
    for i in 0..samples {
        let sep = loop {
            sampling::in_ball(&mut rng, radius, &mut x);
            if i % 2 == 0 {
                sampling::in_ball(&mut rng, radius, &mut y);
            } else {
                // Nearby partner, pulled back into the ball.
                sampling::near(&mut rng, &x, radius * 1e-3, &mut y);
                sampling::clamp_to_ball(radius, &mut y);
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
        drift_ratio = drift_ratio.max(distance(&fx, &fy) / (declared * sep));
        diffusion_ratio = diffusion_ratio.max(distance(&gx, &gy) / (declared * sep));
    }
    Ok(LipschitzReport {
        radius,
        declared,
        drift_ratio,
        diffusion_ratio,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(a: f64) -> SdeProblem {
        SdeProblem::new(
            "linear",
            1,
            1,
            vec![1.0],
            move |x, out| out[0] = a * x[0],
            |_, out| out[0] = 0.0,
            move |_| a.abs(),
        )
        .unwrap()
    }

    #[test]
    fn linear_drift_attains_ratio_one() {
        let report = check_local_lipschitz(&linear(2.0), 3.0, 1000, 7).unwrap();
        assert!((report.drift_ratio - 1.0).abs() < 1e-9, "{report:?}");
        assert!(report.consistent());
    }

    #[test]
    fn understated_profile_is_detected() {
        let p = SdeProblem::new(
            "cubic",
            1,
            1,
            vec![0.0],
            |x, out| out[0] = -x[0].powi(3),
            |_, out| out[0] = 0.0,
            |r| r * r, // true constant is 3R^2
        )
        .unwrap();
        let report = check_local_lipschitz(&p, 2.0, 10_000, 1).unwrap();
        assert!(!report.consistent());
    }

    #[test]
    fn rejects_bad_dimensions() {
        let r = SdeProblem::new("x", 2, 1, vec![0.0], |_, _| {}, |_, _| {}, |_| 1.0);
        assert!(matches!(r, Err(SdeError::Dimension { .. })));
        let r = SdeProblem::new("x", 0, 1, vec![], |_, _| {}, |_, _| {}, |_| 1.0);
        assert!(r.is_err());
    }

    #[test]
    fn caches_coefficient_norms_at_origin() {
        let p = SdeProblem::new(
            "shifted",
            2,
            1,
            vec![0.0, 0.0],
            |_, out| {
                out[0] = 3.0;
                out[1] = 4.0
            },
            |_, out| {
                out[0] = 1.0;
                out[1] = 0.0
            },
            |_| 1.0,
        )
        .unwrap();
        assert_eq!(p.f0_norm(), 5.0);
        assert_eq!(p.g0_norm(), 1.0);
    }

    #[test]
    fn condition_set_regime() {
        assert!(ConditionSet::new(6.0, 4.0, 1.0, 1.0).is_ok());
        assert!(ConditionSet::new(6.0, 2.0, 1.0, 1.0).is_err());
        assert!(ConditionSet::new(4.0, 4.0, 1.0, 1.0).is_err());
        assert!(ConditionSet::new(7.0, 4.0, 1.0, 1.0).is_err());
        let set = ConditionSet::new(6.0, 4.0, 1.0, 1.0).unwrap();
        assert!(set.with_diffusion_growth(3.0, 2.0).is_ok());
        // q = 4 > p + 2 - r = 3
        assert!(set.with_diffusion_growth(5.0, 2.0).is_err());
        assert_eq!(
            set.with_diffusion_growth(3.0, 2.0).unwrap().sup_moment_exponent(),
            5.0
        );
    }
}
