use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default bound on the wraparound factor `exp(-L)`.
pub const DEFAULT_DECAY_TOL: f64 = 1e-6;

/// Periodic box `[-L, L)^N` sampled with `M` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

impl GridSpec {
    /// Build a grid and check that `exp(-L)` is below the default decay tolerance.
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        Self::with_decay_tol(dim, half_width, points, DEFAULT_DECAY_TOL)
    }

    pub fn with_decay_tol(
        dim: usize,
        half_width: f64,
        points: usize,
        decay_tol: f64,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {points} must be a power of two >= 8"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half-width {half_width} must be positive"
            )));
        }
        if (-half_width).exp() > decay_tol {
            return Err(Error::InvalidGrid(format!(
                "box too small: exp(-{half_width}) exceeds decay tolerance {decay_tol:e}"
            )));
        }
        Ok(GridSpec {
            dim,
            half_width,
            points,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Total number of lattice points, `M^N`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn box_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// Coordinate of lattice index `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Angular wavenumber of FFT index `i`; the Nyquist index maps to `-M/2`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        let m = self.points as i64;
        let j = i as i64;
        let n = if j < m / 2 { j } else { j - m };
        PI * n as f64 / self.half_width
    }

    /// Lattice multi-index of a flat row-major index (last axis fastest).
    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rem % self.points;
            rem /= self.points;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx[..self.dim]
            .iter()
            .fold(0, |acc, &i| acc * self.points + i)
    }

    /// Position of a flat index; unused trailing components are zero.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.coord(idx[a]);
        }
        x
    }

    /// Index of the lattice point at the origin along each axis.
    pub fn origin_index(&self) -> usize {
        self.points / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(GridSpec::new(2, 16.0, 100).is_err());
        assert!(GridSpec::new(4, 16.0, 64).is_err());
        assert!(GridSpec::new(2, 16.0, 4).is_err());
        assert!(GridSpec::new(2, 3.0, 64).is_err());
        assert!(GridSpec::new(2, 16.0, 256).is_ok());
    }

    #[test]
    fn origin_is_a_lattice_point() {
        let g = GridSpec::new(2, 16.0, 64).unwrap();
        assert_eq!(g.coord(g.origin_index()), 0.0);
        let flat = g.ravel(&[3, 5]);
        assert_eq!(g.unravel(flat)[..2], [3, 5]);
    }

    #[test]
    fn nyquist_is_negative() {
        let g = GridSpec::new(1, 16.0, 8).unwrap();
        assert!(g.wavenumber(4) < 0.0);
        assert!((g.wavenumber(1) - PI / 16.0).abs() < 1e-15);
    }
}
