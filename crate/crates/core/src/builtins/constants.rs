//! Constants of the built-in examples obtained by brute-force grid search.

use serde::{Deserialize, Serialize};

/// Default grid size for the constant searches.
pub const GRID_POINTS: usize = 1_000_000;

/// Maximizes `f` on a uniform grid over `[lo, hi]`, then refines around the
/// best grid point by golden-section search. Returns `(argmax, max)`.
pub fn grid_maximize(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    assert!(points >= 2 && hi > lo);
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (lo, f(lo));
    for i in 1..points {
        let x = lo + i as f64 * step;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        if b - a <= 1e-15 * (1.0 + best.0.abs()) {
            break;
        }
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        let (fc, fd) = (f(c), f(d));
        for (x, v) in [(c, fc), (d, fd)] {
            if v > best.1 {
                best = (x, v);
            }
        }
        if fc >= fd {
            b = d;
        } else {
            a = c;
        }
    }
    best
}

/// Derived constants for the exponential example `f(x) = ax - e^{3x}`,
/// `g(x) = e^x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example1Constants {
    pub a: f64,
    /// `C = sup_{x>0} (-x e^{3x} + e^{2x})`
    pub c: f64,
    /// Argmax of the `C` search.
    pub c_argmax: f64,
    /// `R₀`: twice the point beyond which the far-pair bracket
    /// `-z e^{3z} + z + 3/2 (e^{2z} - 2e^z + 1)` stays negative on the grid.
    pub r0: f64,
    /// `K = a + C + 4`
    pub k: f64,
    /// `H = a + 3/2 e^{4R₀}`
    pub h: f64,
    pub grid_points: usize,
}

/// Far-pair bracket, written with `expm1` to avoid cancellation near zero.
fn far_pair_bracket(z: f64) -> f64 {
    -z * (3.0 * z).exp_m1() + 1.5 * z.exp_m1().powi(2)
}

pub fn derive_example1(a: f64, points: usize) -> Example1Constants {
    let (c_argmax, c) = grid_maximize(|x| -x * (3.0 * x).exp() + (2.0 * x).exp(), 0.0, 10.0, points);
    let z_max = 20.0;
    let step = z_max / points as f64;
    let mut last_nonneg = None;
    for i in 1..=points {
        let z = i as f64 * step;
        if far_pair_bracket(z) >= 0.0 {
            last_nonneg = Some(i);
        }
    }
    let z0 = (last_nonneg.unwrap_or(0) + 1) as f64 * step;
    let r0 = 2.0 * z0;
    Example1Constants {
        a,
        c,
        c_argmax,
        r0,
        k: a + c + 4.0,
        h: a + 1.5 * (4.0 * r0).exp(),
        grid_points: points,
    }
}

/// Derived constants for `f(x) = x - x^3`, `g(x) = |x|^{3/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example2Constants {
    pub p: f64,
    /// `K = max_{|x| <= radius} (x f(x) + (p-1)/2 g(x)^2) / (1 + x^2)`
    pub k: f64,
    pub k_argmax: f64,
    pub radius: f64,
    pub grid_points: usize,
}

pub fn derive_example2(p: f64, radius: f64, points: usize) -> Example2Constants {
    let functional = |x: f64| {
        let f = x - x * x * x;
        let g2 = x.abs().powi(3);
        (x * f + 0.5 * (p - 1.0) * g2) / (1.0 + x * x)
    };
    let (k_argmax, k) = grid_maximize(functional, -radius, radius, points);
    Example2Constants {
        p,
        k,
        k_argmax,
        radius,
        grid_points: points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_maximize_finds_parabola_peak() {
        let (x, v) = grid_maximize(|x| -(x - 0.123_456_7).powi(2) + 2.0, -1.0, 1.0, 1001);
        assert!((x - 0.123_456_7).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn example1_constants() {
        let c = derive_example1(1.0, 100_000);
        // -x e^{3x} + e^{2x} is 1 at x = 0 and increasing there
        assert!(c.c > 1.0 && c.c < 1.2, "{c:?}");
        assert!(c.c_argmax > 0.0 && c.c_argmax < 0.5);
        assert_eq!(c.k, 1.0 + c.c + 4.0);
        assert!(c.r0 > 0.0 && c.r0 < 1e-3, "bracket negative on all of (0, 20]: {c:?}");
        assert!((c.h - (1.0 + 1.5 * (4.0 * c.r0).exp())).abs() < 1e-15);
    }

    #[test]
    fn far_pair_bracket_sign() {
        for z in [1e-6, 1e-3, 0.1, 1.0, 5.0, 20.0] {
            assert!(far_pair_bracket(z) < 0.0, "z = {z}");
        }
    }

    #[test]
    fn example2_constant() {
        let c = derive_example2(6.0, 1e3, 200_000);
        // functional at the argmax matches a local brute-force check
        let f = |x: f64| (x * x - x.powi(4) + 2.5 * x.abs().powi(3)) / (1.0 + x * x);
        for i in 0..20_001 {
            let x = -5.0 + i as f64 * 5e-4;
            assert!(f(x) <= c.k * (1.0 + 1e-15));
        }
        assert!(c.k > 1.7 && c.k < 1.8, "{c:?}");
    }
}
