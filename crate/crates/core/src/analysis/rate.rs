use serde::Serialize;

use crate::error::{Result, SdeError};

/// Least-squares fit of `ln(error^{1/q})` against `ln Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    /// Expected slope on the `1/q` root scale.
    pub theoretical_slope: f64,
    pub rows_used: usize,
}

/// Fits `(Δ, E|e|^q)` pairs on the `q`-th root scale. Needs at least three
/// rows, all estimates positive and finite.
pub fn fit_rate(points: &[(f64, f64)], q: f64) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(SdeError::InvalidParameter(format!(
            "rate fit needs at least 3 rows, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(_, e)| !(e > 0.0 && e.is_finite())) {
        return Err(SdeError::DegenerateLadder);
    }
    let xs: Vec<f64> = points.iter().map(|&(d, _)| d.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| e.ln() / q).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(SdeError::DegenerateLadder);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
        theoretical_slope: 0.5,
        rows_used: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (2..9).map(|j| 2f64.powi(-j)).map(|d| (d, f(d))).collect()
    }

    #[test]
    fn exact_half_order() {
        let q = 4.0;
        let fit = fit_rate(&ladder(|d| d.powf(q / 2.0)), q).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
    }

    #[test]
    fn exact_first_order_with_constant() {
        let q = 3.0;
        let fit = fit_rate(&ladder(|d| 4.0 * d.powf(q)), q).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 4f64.ln() / q).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn zero_estimate_is_degenerate() {
        let mut pts = ladder(|d| d);
        pts[2].1 = 0.0;
        assert_eq!(fit_rate(&pts, 2.0), Err(SdeError::DegenerateLadder));
    }

    #[test]
    fn too_few_rows() {
        assert!(fit_rate(&[(0.5, 1.0), (0.25, 0.5)], 2.0).is_err());
    }
}
