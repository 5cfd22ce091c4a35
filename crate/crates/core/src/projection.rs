//! `H^1`-orthogonal subspaces, their complements, and Hessian-type operators restricted to a
//! complement.
//!
//! Fields travel with their image under `-Laplacian + 1`, so every `H^1` inner product is a
//! plain `L^2` dot and no transform is spent on geometry.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::field::{free_helmholtz, free_helmholtz_inverse, symmetrize, translate, Field};
use crate::krylov::{
    lanczos_smallest_restricted, minres_restricted, KrylovOptions, KrylovOutcome, KrylovVector,
};

/// A field and `(-Laplacian + 1)` applied to it.
#[derive(Clone, Debug)]
pub struct DualPair {
    pub field: Field,
    pub dual: Field,
}

impl DualPair {
    pub fn new(field: Field) -> Self {
        let dual = free_helmholtz(&field);
        DualPair { field, dual }
    }

    pub fn h1_dot(&self, other: &DualPair) -> f64 {
        self.field.dot(&other.dual)
    }

    pub fn h1_norm(&self) -> f64 {
        self.h1_dot(self).max(0.0).sqrt()
    }

    pub fn translated(&self, y: &[f64]) -> DualPair {
        DualPair {
            field: translate(&self.field, y),
            dual: translate(&self.dual, y),
        }
    }
}

impl KrylovVector for DualPair {
    fn axpy(&mut self, a: f64, x: &Self) {
        self.field.axpy(a, &x.field);
        self.dual.axpy(a, &x.dual);
    }

    fn scale(&mut self, a: f64) {
        self.field.scale(a);
        self.dual.scale(a);
    }

    fn zeros_like(&self) -> Self {
        DualPair {
            field: Field::zeros(*self.field.grid()),
            dual: Field::zeros(*self.field.grid()),
        }
    }
}

/// Span of finitely many fields with an `H^1`-orthonormal basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    vectors: Vec<DualPair>,
    gram_condition: f64,
}

impl Subspace {
    pub fn empty() -> Self {
        Subspace {
            vectors: Vec::new(),
            gram_condition: 1.0,
        }
    }

    /// Orthonormalize `fields` by two Cholesky passes on the `H^1` Gram matrix.
    ///
    /// Fails when the Gram matrix is numerically singular; its condition number is kept.
    pub fn new(fields: &[Field]) -> Result<Self> {
        let pairs: Vec<DualPair> = fields.iter().map(|f| DualPair::new(f.clone())).collect();
        Self::from_pairs(pairs)
    }

    pub fn from_pairs(pairs: Vec<DualPair>) -> Result<Self> {
        if pairs.is_empty() {
            return Ok(Self::empty());
        }
        let gram = gram_matrix(&pairs);
        let eig = SymmetricEigen::new(gram.clone());
        let lmax = eig.eigenvalues.iter().copied().fold(f64::MIN, f64::max);
        let lmin = eig.eigenvalues.iter().copied().fold(f64::MAX, f64::min);
        let gram_condition = if lmin > 0.0 {
            lmax / lmin
        } else {
            f64::INFINITY
        };
        if !(gram_condition < 1e14) {
            return Err(Error::InvalidInput(format!(
                "frame is linearly dependent (Gram condition {gram_condition:e})"
            )));
        }
        let mut vectors = pairs;
        for _ in 0..2 {
            vectors = cholesky_orthonormalize(&vectors, &gram_matrix(&vectors))?;
        }
        Ok(Subspace {
            vectors,
            gram_condition,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn gram_condition(&self) -> f64 {
        self.gram_condition
    }

    pub fn vectors(&self) -> &[DualPair] {
        &self.vectors
    }

    pub fn field(&self, j: usize) -> &Field {
        &self.vectors[j].field
    }

    /// `<h, e_j>_{H^1}` for each basis field.
    pub fn coeffs(&self, h: &Field) -> Vec<f64> {
        self.vectors.iter().map(|e| h.dot(&e.dual)).collect()
    }

    pub fn combine(&self, c: &[f64]) -> Field {
        let mut out = Field::zeros(*self.vectors[0].field.grid());
        for (e, &cj) in self.vectors.iter().zip(c) {
            out.axpy(cj, &e.field);
        }
        out
    }

    /// Orthogonal projection onto the span.
    pub fn project(&self, h: &Field) -> Field {
        if self.is_empty() {
            return Field::zeros(*h.grid());
        }
        self.combine(&self.coeffs(h))
    }

    /// `h` minus its projection.
    pub fn remove(&self, h: &Field) -> Field {
        let mut out = h.clone();
        for e in &self.vectors {
            let c = out.dot(&e.dual);
            out.axpy(-c, &e.field);
        }
        out
    }

    pub fn remove_pair(&self, p: &mut DualPair) {
        for e in &self.vectors {
            let c = p.field.dot(&e.dual);
            p.axpy(-c, e);
        }
    }

    /// Every basis field shifted by `y`, re-orthonormalized since translation drops the
    /// imaginary part of the Nyquist mode.
    pub fn translated(&self, y: &[f64]) -> Result<Subspace> {
        Self::from_pairs(self.vectors.iter().map(|e| e.translated(y)).collect())
    }

    /// Span of both; the result is re-orthonormalized.
    pub fn join(&self, other: &Subspace) -> Result<Subspace> {
        let mut pairs = self.vectors.clone();
        pairs.extend(other.vectors.iter().cloned());
        Self::from_pairs(pairs)
    }

    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = gram_matrix(&self.vectors);
        let n = g.nrows();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }
}

fn gram_matrix(pairs: &[DualPair]) -> DMatrix<f64> {
    let n = pairs.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = 0.5 * (pairs[i].h1_dot(&pairs[j]) + pairs[j].h1_dot(&pairs[i]));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn cholesky_orthonormalize(pairs: &[DualPair], gram: &DMatrix<f64>) -> Result<Vec<DualPair>> {
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("frame Gram matrix is not positive definite".into()))?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("frame Gram factor is singular".into()))?;
    let n = pairs.len();
    Ok((0..n)
        .map(|i| {
            let mut out = pairs[0].zeros_like();
            for j in 0..=i {
                out.axpy(linv[(i, j)], &pairs[j]);
            }
            out
        })
        .collect())
}

/// Orthogonal complement of a subspace, optionally intersected with the lattice-symmetric
/// sector (which represents radial fields).
#[derive(Clone, Debug)]
pub struct Complement {
    pub space: Subspace,
    pub symmetric: bool,
}

impl Complement {
    pub fn new(space: Subspace, symmetric: bool) -> Self {
        Complement { space, symmetric }
    }

    pub fn project(&self, h: &Field) -> Field {
        if self.symmetric {
            self.space.remove(&symmetrize(h))
        } else {
            self.space.remove(h)
        }
    }

    pub fn project_pair(&self, p: &mut DualPair) {
        if self.symmetric {
            p.field = symmetrize(&p.field);
            p.dual = symmetrize(&p.dual);
        }
        self.space.remove_pair(p);
    }

    pub fn lift(&self, h: &Field) -> DualPair {
        let mut p = DualPair::new(h.clone());
        self.project_pair(&mut p);
        p
    }
}

/// `z -> Proj(z - (-Laplacian + 1)^{-1}(weight z))`, self-adjoint in `H^1` on the complement.
///
/// With `weight = f'(u)` this is the projected Hessian of `I` at `u`; with
/// `weight = f'(u) - V(eps x)` that of `E_eps`.
pub fn hessian_apply(c: &Complement, weight: &Field, z: &DualPair) -> DualPair {
    let m = weight.mul(&z.field);
    let mut out = DualPair {
        field: z.field.sub(&free_helmholtz_inverse(&m)),
        dual: z.dual.sub(&m),
    };
    c.project_pair(&mut out);
    out
}

/// Solve `hessian_apply(c, weight, z) = Proj(rhs)` for `z` in the complement by MINRES.
pub fn solve_hessian(
    c: &Complement,
    weight: &Field,
    rhs: &Field,
    opts: &KrylovOptions,
) -> Result<(Field, KrylovOutcome)> {
    let b = c.lift(rhs);
    let (z, out) = minres_restricted(
        |z: &DualPair| hessian_apply(c, weight, z),
        |a, b| a.h1_dot(b),
        |v| c.project_pair(v),
        &b,
        opts,
    )?;
    Ok((z.field, out))
}

/// Like [`solve_hessian`], with the stopping test relative to `reference` when that exceeds the
/// projected right-hand side, for sources that are mostly removed by the projection.
pub fn solve_hessian_scaled(
    c: &Complement,
    weight: &Field,
    rhs: &Field,
    reference: f64,
    opts: &KrylovOptions,
) -> Result<(Field, KrylovOutcome)> {
    let b = c.lift(rhs);
    let bn = b.h1_norm();
    if bn == 0.0 {
        return Ok((
            Field::zeros(*rhs.grid()),
            KrylovOutcome {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let tol = (opts.tol * (reference / bn).max(1.0)).min(0.5);
    let o = KrylovOptions {
        tol,
        max_iter: opts.max_iter,
    };
    let (z, out) = minres_restricted(
        |z: &DualPair| hessian_apply(c, weight, z),
        |a, b| a.h1_dot(b),
        |v| c.project_pair(v),
        &b,
        &o,
    )?;
    Ok((z.field, out))
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct InverseBound {
    /// Smallest singular value of the restricted operator.
    pub sigma_min: f64,
    /// `1 / sigma_min`.
    pub bound: f64,
    pub steps: usize,
}

/// Smallest singular value of `hessian_apply(c, weight, .)` by Lanczos on its square.
pub fn inverse_bound(
    c: &Complement,
    weight: &Field,
    start: &Field,
    max_steps: usize,
    tol: f64,
) -> Result<InverseBound> {
    let s = c.lift(start);
    let (lmin, steps) = lanczos_smallest_restricted(
        |z: &DualPair| hessian_apply(c, weight, &hessian_apply(c, weight, z)),
        |a, b| a.h1_dot(b),
        |v| c.project_pair(v),
        &s,
        max_steps,
        tol,
    )?;
    let sigma_min = lmin.max(0.0).sqrt();
    Ok(InverseBound {
        sigma_min,
        bound: 1.0 / sigma_min,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    fn grid() -> GridSpec {
        GridSpec::new(2, 16.0, 64).unwrap()
    }

    fn bump(g: GridSpec, cx: f64, s: f64) -> Field {
        Field::from_fn(g, |x| (-((x[0] - cx).powi(2) + x[1] * x[1]) / s).exp())
    }

    #[test]
    fn subspace_is_orthonormal_and_projects() {
        let g = grid();
        let fields = vec![bump(g, 0.0, 1.0), bump(g, 0.5, 2.0), bump(g, -1.0, 3.0)];
        let s = Subspace::new(&fields).unwrap();
        assert!(s.orthonormality_error() < 1e-12);
        let h = bump(g, 0.2, 1.5).map(|v| v * v);
        let p = s.project(&h);
        assert!(s.project(&p).sub(&p).h1_norm() < 1e-12 * p.h1_norm());
        // Pythagoras.
        let r = s.remove(&h);
        let lhs = h.h1_dot(&h);
        let rhs = p.h1_dot(&p) + r.h1_dot(&r);
        assert!((lhs - rhs).abs() < 1e-10 * lhs);
        assert!(s.project(&fields[1]).sub(&fields[1]).h1_norm() < 1e-10);
    }

    #[test]
    fn dependent_frame_is_rejected() {
        let g = grid();
        let a = bump(g, 0.0, 1.0);
        assert!(Subspace::new(&[a.clone(), a.scaled(2.0)]).is_err());
    }

    #[test]
    fn zero_weight_gives_identity_and_unit_bound() {
        let g = grid();
        let c = Complement::new(Subspace::new(&[bump(g, 0.0, 1.0)]).unwrap(), false);
        let w = Field::zeros(g);
        let rhs = c.project(&bump(g, 1.0, 2.0));
        let (z, _) = solve_hessian(&c, &w, &rhs, &KrylovOptions::default()).unwrap();
        assert!(z.sub(&rhs).h1_norm() < 1e-10);
        let b = inverse_bound(&c, &w, &bump(g, 0.3, 4.0), 20, 1e-10).unwrap();
        assert!((b.bound - 1.0).abs() < 1e-10);
    }

    #[test]
    fn restricted_solve_satisfies_equation() {
        let g = grid();
        let c = Complement::new(
            Subspace::new(&[bump(g, 0.0, 1.0), bump(g, 1.0, 1.0)]).unwrap(),
            false,
        );
        let w = bump(g, 0.0, 4.0).scaled(0.5);
        let rhs = c.project(&bump(g, -0.5, 2.0));
        let opts = KrylovOptions {
            tol: 1e-12,
            max_iter: 200,
        };
        let (z, _) = solve_hessian(&c, &w, &rhs, &opts).unwrap();
        let az = hessian_apply(&c, &w, &DualPair::new(z.clone()));
        assert!(az.field.sub(&rhs).h1_norm() < 1e-9 * rhs.h1_norm());
        assert!(c.space.coeffs(&z).iter().all(|v| v.abs() < 1e-10));
    }
}
