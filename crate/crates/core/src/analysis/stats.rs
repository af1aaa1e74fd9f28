use rayon::prelude::*;
use serde::Serialize;

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Sequential two-pass mean and standard error, in slice order.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, se: 0.0 };
        }
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        Self {
            mean,
            se: (ss / (n - 1) as f64 / n as f64).sqrt(),
        }
    }
}

const CHUNK: usize = 256;

/// Maps replicates `0..n` in parallel and feeds the results to `consume` in
/// index order. Memory stays bounded by the chunk size.
pub(crate) fn for_each_replicate<T, E, F, C>(n: usize, f: F, mut consume: C) -> Result<(), E>
where
    T: Send,
    E: Send,
    F: Fn(u64) -> Result<T, E> + Sync,
    C: FnMut(T) -> Result<(), E>,
{
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let results: Vec<Result<T, E>> = (start..end)
            .into_par_iter()
            .map(|r| f(r as u64))
            .collect();
        for r in results {
            consume(r?)?;
        }
        start = end;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_constant_sample() {
        let e = Estimate::from_samples(&[2.0; 10]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.se, 0.0);
    }

    #[test]
    fn estimate_standard_error() {
        // var = 1 (sample), n = 4 -> se = 0.5
        let e = Estimate::from_samples(&[1.0 - 0.5f64.sqrt() * 1.0, 1.0 + 0.5f64.sqrt(), 1.0 - 0.5f64.sqrt(), 1.0 + 0.5f64.sqrt()]);
        assert!((e.mean - 1.0).abs() < 1e-15);
        assert!((e.se - (2.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn replicates_arrive_in_order() {
        let mut seen = Vec::new();
        for_each_replicate::<_, (), _, _>(1000, |r| Ok(r * 2), |v| {
            seen.push(v);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, (0..1000).map(|r| r * 2).collect::<Vec<_>>());
    }
}
