//! Seeded Brownian increments on the finest dyadic grid, shared by every
//! coarser step size.
//!
//! Increment `k` of component `c` for replicate `r` is a pure function of
//! `(seed, r, k, c)`: the ChaCha8 keystream keyed by `seed`, on stream
//! `(c << 48) | r`, read at word position `k`, then mapped through the
//! inverse normal CDF. Every increment is rounded to a multiple of a fixed
//! power of two (about `2^-33 sqrt(T)`), small enough that all partial sums
//! of up to `2^26` increments are exact in `f64`. Coarsening and bridge
//! values are therefore bitwise independent of summation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc_inv;

use crate::error::{Result, SdeError};

/// Deepest supported ladder.
pub const MAX_LEVEL: u32 = 26;
const MAX_NOISE_DIM: usize = 1 << 16;
const MAX_REPLICATE: u64 = 1 << 48;

/// One Brownian path at resolution `T 2^-finest_level`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicPathLadder {
    t_end: f64,
    finest_level: u32,
    m: usize,
    seed: u64,
    replicate: u64,
    /// Row `k` holds the `m` components of increment `k`.
    increments: Vec<f64>,
}

/// Grid spacing all increments are rounded to.
fn quantum(t_end: f64) -> f64 {
    let e = t_end.sqrt().log2().floor() as i32 - 33;
    2f64.powi(e)
}

#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal quantile.
#[inline]
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

fn keystream(seed: u64, replicate: u64, component: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((component as u64) << 48) | replicate);
    rng
}

/// Standard normal variate keyed by `(seed, replicate, index, component)`.
pub fn keyed_normal(seed: u64, replicate: u64, index: u64, component: usize) -> f64 {
    let mut rng = keystream(seed, replicate, component);
    rng.set_word_pos(2 * index as u128);
    normal_quantile(open_unit(rng.next_u64()))
}

impl DyadicPathLadder {
    pub fn generate(
        t_end: f64,
        finest_level: u32,
        m: usize,
        seed: u64,
        replicate: u64,
    ) -> Result<Self> {
        if finest_level > MAX_LEVEL {
            return Err(SdeError::LadderTooDeep(finest_level));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(SdeError::InvalidParameter("horizon must be positive".into()));
        }
        if m == 0 || m > MAX_NOISE_DIM || replicate >= MAX_REPLICATE {
            return Err(SdeError::InvalidParameter(
                "noise dimension or replicate index out of range".into(),
            ));
        }
        let n = 1usize << finest_level;
        let q = quantum(t_end);
        let scale = (t_end / n as f64).sqrt() / q;
        let mut increments = vec![0.0; n * m];
        for c in 0..m {
            let mut rng = keystream(seed, replicate, c);
            for k in 0..n {
                let z = normal_quantile(open_unit(rng.next_u64()));
                increments[k * m + c] = (z * scale).round() * q;
            }
        }
        Ok(Self {
            t_end,
            finest_level,
            m,
            seed,
            replicate,
            increments,
        })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn finest_level(&self) -> u32 {
        self.finest_level
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    /// Number of finest cells.
    pub fn len(&self) -> usize {
        1 << self.finest_level
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn delta_min(&self) -> f64 {
        self.step(self.finest_level)
    }

    /// Step size `T 2^-level`.
    pub fn step(&self, level: u32) -> f64 {
        self.t_end / (1u64 << level) as f64
    }

    /// Finest increments, row-major `len() x m`.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Level of the dyadic step `delta`, if it is one.
    pub fn level_of(&self, delta: f64) -> Result<u32> {
        (0..=self.finest_level)
            .find(|&j| self.step(j) == delta)
            .ok_or(SdeError::StepNotDyadic(delta))
    }

    /// Increments at `level`: entry `k` is the left-to-right sum of finest
    /// increments `k 2^(J-j) .. (k+1) 2^(J-j)`.
    pub fn coarsen(&self, level: u32) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        self.coarsen_into(level, &mut out)?;
        Ok(out)
    }

    pub fn coarsen_into(&self, level: u32, out: &mut Vec<f64>) -> Result<()> {
        if level > self.finest_level {
            return Err(SdeError::LevelOutOfRange {
                level,
                finest: self.finest_level,
            });
        }
        let m = self.m;
        let block = 1usize << (self.finest_level - level);
        out.clear();
        out.resize((1usize << level) * m, 0.0);
        for (k, chunk) in self.increments.chunks_exact(block * m).enumerate() {
            let dst = &mut out[k * m..(k + 1) * m];
            for row in chunk.chunks_exact(m) {
                for (o, v) in dst.iter_mut().zip(row) {
                    *o += v;
                }
            }
        }
        Ok(())
    }

    /// Index of the finest grid point nearest to `t`.
    pub fn snap(&self, t: f64) -> Result<usize> {
        let slack = 1e-12 * self.t_end;
        if !(t >= -slack && t <= self.t_end + slack) {
            return Err(SdeError::TimeOutOfRange {
                t,
                t_end: self.t_end,
            });
        }
        let k = (t / self.delta_min()).round() as usize;
        Ok(k.min(self.len()))
    }

    /// `B(t)` with `t` snapped to the finest grid.
    pub fn bridge_value(&self, t: f64) -> Result<Vec<f64>> {
        let k = self.snap(t)?;
        let mut b = vec![0.0; self.m];
        for row in self.increments[..k * self.m].chunks_exact(self.m) {
            for (o, v) in b.iter_mut().zip(row) {
                *o += v;
            }
        }
        Ok(b)
    }

    /// `B` at every finest grid point, row-major `(len() + 1) x m`.
    pub fn cumulative(&self) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; (self.len() + 1) * m];
        for k in 0..self.len() {
            for c in 0..m {
                out[(k + 1) * m + c] = out[k * m + c] + self.increments[k * m + c];
            }
        }
        out
    }
}
