//! Spectrum of the linearized operator `-Laplacian + 1 - f'(omega)` and its kernel.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::eigen::{lobpcg, map_column_pairs, random_block, LobpcgOptions};
use crate::error::{Error, Result};
use crate::field::{angular_energy_fraction, gradient, spectral, Field, GridSpec};
use crate::model::EnergyModel;

/// Lowest eigenpairs of a Schroedinger operator `-Laplacian + 1 - U` in `L^2`.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// `L^2`-orthonormal eigenfields.
    pub fields: Vec<Field>,
    /// `|A phi - lambda phi|_{L^2}` per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Extra block columns carried beyond the requested count to separate clusters.
const GUARD: usize = 4;

/// `m` lowest eigenpairs of `-Laplacian + 1 - U`, preconditioned by the free inverse.
///
/// `start` fields, when given, seed the first block columns; the rest are random from `seed`.
pub fn schrodinger_eigenpairs(
    u: &Field,
    m: usize,
    start: &[Field],
    opts: &LobpcgOptions,
    seed: u64,
) -> Result<EigenPairs> {
    let grid = *u.grid();
    let sp = spectral(&grid);
    let uv = u.values().to_vec();
    let apply = |x: &DMatrix<f64>| {
        map_column_pairs(x, |a, b| {
            let (mut ra, mut rb) = sp.apply_even_pair(a, b, |k2| 1.0 + k2);
            for i in 0..a.len() {
                ra[i] -= uv[i] * a[i];
                rb[i] -= uv[i] * b[i];
            }
            (ra, rb)
        })
    };
    let pre = |x: &DMatrix<f64>| {
        map_column_pairs(x, |a, b| sp.apply_even_pair(a, b, |k2| 1.0 / (1.0 + k2)))
    };
    let nb = m + GUARD;
    let mut x0 = random_block(grid.len(), nb, seed);
    for (j, s) in start.iter().take(nb).enumerate() {
        x0.column_mut(j).copy_from_slice(s.values());
    }
    let out = lobpcg(apply, pre, None, None, x0, m, opts)?;
    let scale = 1.0 / grid.cell_volume().sqrt();
    let fields: Vec<Field> = (0..m)
        .map(|j| {
            Field::from_values(
                grid,
                out.vectors.column(j).iter().map(|v| v * scale).collect(),
            )
        })
        .collect::<Result<_>>()?;
    let residuals = fields
        .iter()
        .zip(&out.values)
        .map(|(phi, &lam)| schrodinger_apply(u, phi).sub(&phi.scaled(lam)).l2_norm())
        .collect();
    Ok(EigenPairs {
        values: out.values[..m].to_vec(),
        fields,
        residuals,
        iterations: out.iterations,
    })
}

/// `(-Laplacian + 1 - U) phi`.
pub fn schrodinger_apply(u: &Field, phi: &Field) -> Field {
    crate::field::free_helmholtz(phi).sub(&u.mul(phi))
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub eigenfields: Vec<Field>,
    pub kernel_dim_full: usize,
    pub kernel_dim_radial: usize,
    pub morse_index: usize,
    pub tol_kernel: f64,
    /// `H^1`-orthonormalized translation modes.
    #[serde(skip)]
    pub z_basis: Vec<Field>,
    /// `H^1`-orthonormal kernel directions orthogonal to the translations.
    #[serde(skip)]
    pub y_basis: Vec<Field>,
    /// `|L_0 d_i omega|_{L^2} / |d_i omega|_{L^2}` per axis.
    pub translation_residuals: Vec<f64>,
    pub iterations: usize,
}

impl SpectralData {
    /// Dimension of the degeneracy space entering the Galerkin space.
    pub fn q_dim(&self) -> usize {
        self.y_basis.len()
    }
}

/// `f'(omega)` as a pointwise potential.
pub fn linearization_potential(model: &EnergyModel, omega: &Field) -> Field {
    model.fprime_field(omega)
}

/// Eigenpairs of `L_0 = -Laplacian + 1 - f'(omega)` and the kernel split.
pub fn lowest_eigenpairs(
    model: &EnergyModel,
    omega: &Field,
    m: usize,
    opts: &LobpcgOptions,
    seed: u64,
) -> Result<SpectralData> {
    let u = linearization_potential(model, omega);
    analyze_operator(&u, omega, m, opts, seed)
}

/// Spectrum and kernel of `-Laplacian + 1 - U` with translation modes taken from `profile`.
///
/// `U` need not come from the profile; a potential with a known radial zero mode exercises the
/// degenerate branch.
pub fn analyze_operator(
    u: &Field,
    profile: &Field,
    m: usize,
    opts: &LobpcgOptions,
    seed: u64,
) -> Result<SpectralData> {
    let derivs = gradient(profile);
    let mut start = vec![profile.clone()];
    start.extend(derivs.iter().cloned());
    let pairs = schrodinger_eigenpairs(u, m, &start, opts, seed)?;
    let translation_residuals = derivs
        .iter()
        .map(|d| schrodinger_apply(u, d).l2_norm() / d.l2_norm())
        .collect();
    let mut data = SpectralData {
        eigenvalues: pairs.values,
        residuals: pairs.residuals,
        eigenfields: pairs.fields,
        kernel_dim_full: 0,
        kernel_dim_radial: 0,
        morse_index: 0,
        tol_kernel: 0.0,
        z_basis: Vec::new(),
        y_basis: Vec::new(),
        translation_residuals,
        iterations: pairs.iterations,
    };
    let scale = data
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .filter(|v| *v > 1e-3)
        .fold(f64::INFINITY, f64::min);
    let tol_kernel = (1e-6 * scale.min(1.0)).max(10.0 * opts.tol);
    kernel_spaces(&mut data, profile, tol_kernel)?;
    Ok(data)
}

/// Gram-Schmidt in `H^1`, dropping vectors whose remainder falls below `drop` times their norm.
pub fn h1_orthonormalize(fields: &[Field], drop: f64) -> Vec<Field> {
    let mut out: Vec<Field> = Vec::new();
    for f in fields {
        let n0 = f.h1_norm();
        let mut v = f.clone();
        for _ in 0..2 {
            for b in &out {
                let c = b.h1_dot(&v);
                v.axpy(-c, b);
            }
        }
        let n = v.h1_norm();
        if n > drop * n0 && n > 0.0 {
            out.push(v.scaled(1.0 / n));
        }
    }
    out
}

/// Count the kernel, form the translation basis, and extract the kernel part orthogonal to it.
pub fn kernel_spaces(data: &mut SpectralData, profile: &Field, tol_kernel: f64) -> Result<()> {
    data.tol_kernel = tol_kernel;
    let kernel: Vec<usize> = (0..data.eigenvalues.len())
        .filter(|&j| data.eigenvalues[j].abs() < tol_kernel)
        .collect();
    if let Some(v) = data
        .eigenvalues
        .iter()
        .find(|v| v.abs() >= tol_kernel && v.abs() < 10.0 * tol_kernel)
    {
        return Err(Error::NonConvergence(format!(
            "eigenvalue {v:e} not separated from the kernel threshold {tol_kernel:e}"
        )));
    }
    if kernel.len() == data.eigenvalues.len() {
        return Err(Error::NonConvergence(
            "kernel cluster fills the computed block; request more eigenpairs".into(),
        ));
    }
    data.kernel_dim_full = kernel.len();
    data.morse_index = data
        .eigenvalues
        .iter()
        .filter(|v| **v < -tol_kernel)
        .count();
    let derivs = gradient(profile);
    data.z_basis = h1_orthonormalize(&derivs, 1e-12);
    let rest: Vec<Field> = kernel
        .iter()
        .map(|&j| remove_components(&data.eigenfields[j], &data.z_basis))
        .collect();
    // Kernel vectors that are translation modes leave only eigenvector error behind.
    let significant: Vec<Field> = rest
        .iter()
        .zip(&kernel)
        .filter(|(r, &j)| r.h1_norm() > 1e-6 * data.eigenfields[j].h1_norm())
        .map(|(r, _)| r.clone())
        .collect();
    data.y_basis = h1_orthonormalize(&significant, 1e-6);
    data.kernel_dim_radial = data.y_basis.len();
    Ok(())
}

/// `v` minus its `H^1` projection onto the orthonormal `basis`.
pub fn remove_components(v: &Field, basis: &[Field]) -> Field {
    let mut out = v.clone();
    for b in basis {
        let c = b.h1_dot(&out);
        out.axpy(-c, b);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    /// `<v, z_i>_{H^1} / |v|_{H^1}` per translation mode.
    pub overlaps: Vec<f64>,
    /// `H^1` norm of the translation-orthogonal part relative to `|v|`.
    pub remainder_norm: f64,
    /// Angular fraction of the remainder; `None` when the remainder is numerically zero.
    pub remainder_angular_fraction: Option<f64>,
    pub radial: bool,
}

/// Check that the part of a kernel vector orthogonal to the translation modes is radial.
///
/// Fails with `InvalidInput` if `v` is not in the numerical kernel of `-Laplacian + 1 - U`.
pub fn symmetry_check(
    v: &Field,
    u: &Field,
    data: &SpectralData,
    tol: f64,
) -> Result<SymmetryReport> {
    let rel = schrodinger_apply(u, v).l2_norm() / v.l2_norm().max(1e-300);
    if !(rel <= 1e3 * data.tol_kernel.max(1e-8)) {
        return Err(Error::InvalidInput(format!(
            "field is not in the kernel: |L v|/|v| = {rel:e}"
        )));
    }
    let n = v.h1_norm();
    let overlaps = data.z_basis.iter().map(|z| z.h1_dot(v) / n).collect();
    let rest = remove_components(v, &data.z_basis);
    let remainder_norm = rest.h1_norm() / n;
    let remainder_angular_fraction = if remainder_norm > 1e-6 {
        Some(angular_energy_fraction(&rest, &[0.0; 3])?)
    } else {
        None
    };
    let radial = remainder_angular_fraction.map_or(true, |f| f <= tol);
    Ok(SymmetryReport {
        overlaps,
        remainder_norm,
        remainder_angular_fraction,
        radial,
    })
}

/// Smallest eigenvalue of the free operator on the grid, which is exactly 1.
pub fn free_floor(grid: GridSpec) -> Result<f64> {
    let pairs = schrodinger_eigenpairs(
        &Field::zeros(grid),
        1,
        &[Field::constant(grid, 1.0)],
        &LobpcgOptions {
            tol: 1e-10,
            max_iter: 200,
        },
        3,
    )?;
    Ok(pairs.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::{solve_ground_state, GroundStateOptions};
    use crate::model::{Nonlinearity, Potential};

    fn opts() -> LobpcgOptions {
        LobpcgOptions {
            tol: 1e-8,
            max_iter: 500,
        }
    }

    #[test]
    fn poschl_teller_spectrum() {
        let g = GridSpec::new(1, 16.0, 256).unwrap();
        let m = EnergyModel::new(
            Nonlinearity::cubic(),
            Potential::isotropic(1, 2).unwrap(),
            g,
        )
        .unwrap();
        let gs = solve_ground_state(&m, None, &GroundStateOptions::default()).unwrap();
        let data = lowest_eigenpairs(&m, &gs.omega, 4, &opts(), 1).unwrap();
        assert!(
            (data.eigenvalues[0] + 3.0).abs() < 1e-6,
            "{:?}",
            data.eigenvalues
        );
        assert!(data.eigenvalues[1].abs() < 1e-7);
        assert!(data.eigenvalues[2] > 1.0 - 1e-9);
        assert_eq!(data.kernel_dim_full, 1);
        assert_eq!(data.kernel_dim_radial, 0);
        assert_eq!(data.morse_index, 1);
        // Ground eigenfunction proportional to sech^2.
        let s2 = Field::from_fn(g, |x| 1.0 / x[0].cosh().powi(2));
        let ov = data.eigenfields[0].dot(&s2).abs() / s2.l2_norm();
        assert!(ov > 1.0 - 1e-9);
        let phi = &data.eigenfields[1];
        let z = &data.z_basis[0];
        assert!(phi.h1_dot(z).abs() / phi.h1_norm() > 0.999);
    }

    #[test]
    fn negative_direction_identity() {
        let g = GridSpec::new(1, 16.0, 256).unwrap();
        let m = EnergyModel::new(
            Nonlinearity::cubic(),
            Potential::isotropic(1, 2).unwrap(),
            g,
        )
        .unwrap();
        let gs = solve_ground_state(&m, None, &GroundStateOptions::default()).unwrap();
        let u = linearization_potential(&m, &gs.omega);
        let q = schrodinger_apply(&u, &gs.omega).dot(&gs.omega);
        assert!((q - (2.0 - 4.0) * gs.h1_norm_sq).abs() < 1e-8);
    }

    #[test]
    fn free_operator_floor_is_one() {
        let g = GridSpec::new(2, 16.0, 32).unwrap();
        assert!((free_floor(g).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_radial_kernel_is_detected() {
        let g = GridSpec::new(1, 16.0, 256).unwrap();
        let m = EnergyModel::new(
            Nonlinearity::cubic(),
            Potential::isotropic(1, 2).unwrap(),
            g,
        )
        .unwrap();
        let gs = solve_ground_state(&m, None, &GroundStateOptions::default()).unwrap();
        // -Laplacian + 1 - omega^2 annihilates omega itself.
        let u = gs.omega.mul(&gs.omega);
        let data = analyze_operator(&u, &gs.omega, 3, &opts(), 2).unwrap();
        assert_eq!(data.kernel_dim_full, 1);
        assert_eq!(data.kernel_dim_radial, 1);
        assert_eq!(data.morse_index, 0);
        let rep = symmetry_check(&data.y_basis[0], &u, &data, 1e-4).unwrap();
        assert!(rep.radial);
        assert!(symmetry_check(&gs.omega.map(|v| v * v), &u, &data, 1e-4).is_err());
    }
}
