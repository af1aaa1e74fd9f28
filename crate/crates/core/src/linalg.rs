//! Vector and matrix norms used throughout the crate.
//!
//! States are plain `[f64]` slices of length `d`. Diffusion values are
//! `d x m` matrices stored row-major in [`Matrix`].

use crate::error::{Result, SdeError};

/// Euclidean norm of a state vector.
pub fn euclidean_norm(x: &[f64]) -> Result<f64> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SdeError::NonFiniteState);
    }
    Ok(norm(x))
}

/// Trace norm `sqrt(trace(A^T A))`, i.e. the Frobenius norm.
pub fn trace_norm(a: &Matrix) -> Result<f64> {
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(SdeError::NonFiniteMatrix);
    }
    Ok(norm(&a.data))
}

#[inline]
pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(SdeError::Dimension {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// `out += a * v` for a row-major `rows x cols` matrix `a`.
#[inline]
pub(crate) fn mat_vec_add(a: &[f64], cols: usize, v: &[f64], out: &mut [f64]) {
    for (row, o) in a.chunks_exact(cols).zip(out.iter_mut()) {
        *o += dot(row, v);
    }
}
