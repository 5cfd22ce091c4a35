//! Discrete stand-in for `H^1(R^N)`: real fields on a periodic box with spectral calculus.

mod angular;
mod grid;
mod io;
mod radial;
mod spectral;

pub use angular::angular_energy_fraction;
pub use grid::{GridSpec, DEFAULT_DECAY_TOL};
pub use io::{read_field, write_field, FIELD_MAGIC};
pub use radial::{
    radial_embed, radial_extract, read_profile_csv, write_profile_csv, RadialProfile,
};
pub use spectral::{spectral, Spectral};

use crate::error::{Error, Result};
use crate::krylov::{pcg, KrylovOptions};

/// Real samples on the `M^N` lattice of a [`GridSpec`], row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Sample `f` at every lattice point; `f` receives the first `N` coordinates.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|flat| {
                let x = grid.position(flat);
                f(&x[..grid.dim])
            })
            .collect();
        Field { grid, values }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("value at flat index {i}")));
        }
        Ok(Field { grid, values })
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    fn assert_same(&self, other: &Field) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        self.assert_same(other);
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for s in self.values.iter_mut() {
            *s *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        self.assert_same(other);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field {
            grid: self.grid,
            values,
        }
    }

    /// Linear combination `sum c_i f_i` of fields sharing this grid.
    pub fn combination(grid: GridSpec, coeffs: &[f64], fields: &[&Field]) -> Field {
        let mut out = Field::zeros(grid);
        for (c, f) in coeffs.iter().zip(fields) {
            if *c != 0.0 {
                out.axpy(*c, f);
            }
        }
        out
    }

    /// Lattice quadrature `h^N sum u`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    /// `L^2` inner product by lattice quadrature.
    pub fn dot(&self, other: &Field) -> f64 {
        self.assert_same(other);
        self.grid.cell_volume() * raw_dot(&self.values, &other.values)
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `H^1` inner product `int grad a . grad b + a b`, computed spectrally.
    pub fn h1_dot(&self, other: &Field) -> f64 {
        self.assert_same(other);
        let sp = spectral(&self.grid);
        let scale = self.grid.cell_volume() / self.grid.len() as f64;
        scale * sp.weighted_cross(&self.values, &other.values, |k2| 1.0 + k2)
    }

    pub fn h1_norm(&self) -> f64 {
        self.h1_dot(self).max(0.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value at an arbitrary point by periodic six-point Lagrange interpolation per axis.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        const W: usize = 6;
        let g = &self.grid;
        let m = g.points as i64;
        let h = g.spacing();
        let mut idx = [[0usize; W]; 3];
        let mut wts = [[0.0f64; W]; 3];
        for a in 0..g.dim {
            let s = (x[a] + g.half_width) / h;
            let base = s.floor() as i64 - 2;
            let t = s - base as f64;
            for j in 0..W {
                idx[a][j] = (base + j as i64).rem_euclid(m) as usize;
                let mut w = 1.0;
                for l in 0..W {
                    if l != j {
                        w *= (t - l as f64) / (j as f64 - l as f64);
                    }
                }
                wts[a][j] = w;
            }
        }
        let mstride = g.points;
        match g.dim {
            1 => (0..W).map(|i| wts[0][i] * self.values[idx[0][i]]).sum(),
            2 => {
                let mut s = 0.0;
                for i in 0..W {
                    let row = idx[0][i] * mstride;
                    let mut r = 0.0;
                    for j in 0..W {
                        r += wts[1][j] * self.values[row + idx[1][j]];
                    }
                    s += wts[0][i] * r;
                }
                s
            }
            _ => {
                let mut s = 0.0;
                for i in 0..W {
                    for j in 0..W {
                        let row = (idx[0][i] * mstride + idx[1][j]) * mstride;
                        let mut r = 0.0;
                        for l in 0..W {
                            r += wts[2][l] * self.values[row + idx[2][l]];
                        }
                        s += wts[0][i] * wts[1][j] * r;
                    }
                }
                s
            }
        }
    }
}

/// Plain sum of products with independent partial sums so the loop vectorizes.
pub(crate) fn raw_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// `H^1` inner product with a grid check.
pub fn h1_inner(a: &Field, b: &Field) -> Result<f64> {
    a.check_same_grid(b)?;
    Ok(a.h1_dot(b))
}

/// `L^2` inner product with a grid check.
pub fn l2_inner(a: &Field, b: &Field) -> Result<f64> {
    a.check_same_grid(b)?;
    Ok(a.dot(b))
}

/// Exact diagonal solve of `(-Laplacian + 1) u = h`.
pub fn free_helmholtz_inverse(h: &Field) -> Field {
    let sp = spectral(h.grid());
    Field::from_raw(*h.grid(), sp.apply_even(h.values(), |k2| 1.0 / (1.0 + k2)))
}

/// Two free Helmholtz solves for the price of one transform pair.
pub fn free_helmholtz_inverse_pair(a: &Field, b: &Field) -> (Field, Field) {
    a.assert_same(b);
    let sp = spectral(a.grid());
    let (x, y) = sp.apply_even_pair(a.values(), b.values(), |k2| 1.0 / (1.0 + k2));
    (Field::from_raw(*a.grid(), x), Field::from_raw(*a.grid(), y))
}

/// `(-Laplacian + 1) u`.
pub fn free_helmholtz(u: &Field) -> Field {
    let sp = spectral(u.grid());
    Field::from_raw(*u.grid(), sp.apply_even(u.values(), |k2| 1.0 + k2))
}

/// Solve `(-Laplacian + 1 + V) u = h`.
///
/// Without a potential the solve is the exact Fourier division. With one, preconditioned
/// conjugate gradients run until the preconditioned residual drops below `opts.tol` relative
/// to the right-hand side.
pub fn helmholtz_inverse(
    h: &Field,
    potential: Option<&Field>,
    opts: &KrylovOptions,
) -> Result<Field> {
    let Some(v) = potential else {
        return Ok(free_helmholtz_inverse(h));
    };
    h.check_same_grid(v)?;
    if let Some(i) = v.values().iter().position(|&p| !(1.0 + p > 0.0)) {
        let x = h.grid().position(i);
        return Err(Error::NonCoercive(format!(
            "1 + V = {} at {:?}",
            1.0 + v.values()[i],
            &x[..h.grid().dim]
        )));
    }
    let apply = |u: &Field| {
        let mut out = free_helmholtz(u);
        out.axpy(1.0, &u.mul(v));
        out
    };
    let (u, _) = pcg(apply, free_helmholtz_inverse, h, None, opts)?;
    Ok(u)
}

/// Spectral partial derivative along `axis`.
pub fn partial(u: &Field, axis: usize) -> Field {
    let sp = spectral(u.grid());
    Field::from_raw(*u.grid(), sp.derivative(u.values(), axis))
}

pub fn gradient(u: &Field) -> Vec<Field> {
    let sp = spectral(u.grid());
    sp.gradient(u.values())
        .into_iter()
        .map(|v| Field::from_raw(*u.grid(), v))
        .collect()
}

/// `u(. - y)` by Fourier phase shift; `y` is taken modulo the box period.
pub fn translate(u: &Field, y: &[f64]) -> Field {
    if y.iter().all(|&c| c == 0.0) {
        return u.clone();
    }
    let sp = spectral(u.grid());
    Field::from_raw(*u.grid(), sp.translate(u.values(), y))
}

/// Average over the lattice symmetries fixing the origin: axis reflections and permutations.
///
/// On the lattice these form an exact invariant-subspace projector, which is how radial
/// subspaces are represented.
pub fn symmetrize(u: &Field) -> Field {
    let g = *u.grid();
    let m = g.points;
    let refl: Vec<usize> = (0..m).map(|i| (m - i) % m).collect();
    let v = u.values();
    let out: Vec<f64> = match g.dim {
        1 => (0..m).map(|i| 0.5 * (v[i] + v[refl[i]])).collect(),
        2 => {
            let mut out = vec![0.0; m * m];
            for i in 0..m {
                let ri = refl[i];
                for j in 0..m {
                    let rj = refl[j];
                    let s = v[i * m + j]
                        + v[ri * m + j]
                        + v[i * m + rj]
                        + v[ri * m + rj]
                        + v[j * m + i]
                        + v[rj * m + i]
                        + v[j * m + ri]
                        + v[rj * m + ri];
                    out[i * m + j] = 0.125 * s;
                }
            }
            out
        }
        _ => {
            let perms = [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            let mut out = vec![0.0; g.len()];
            for (flat, o) in out.iter_mut().enumerate() {
                let idx = g.unravel(flat);
                let mut s = 0.0;
                for p in &perms {
                    for f in 0..8 {
                        let mut j = [0usize; 3];
                        for a in 0..3 {
                            let i = idx[p[a]];
                            j[a] = if f & (1 << a) != 0 { refl[i] } else { i };
                        }
                        s += v[(j[0] * m + j[1]) * m + j[2]];
                    }
                }
                *o = s / 48.0;
            }
            out
        }
    };
    Field::from_raw(g, out)
}

/// `|x - center|` sampled on the lattice.
pub fn radius_field(grid: GridSpec, center: &[f64]) -> Field {
    Field::from_fn(grid, |x| {
        x.iter()
            .zip(center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt()
    })
}
