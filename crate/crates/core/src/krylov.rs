//! Matrix-free Krylov solvers acting on [`Field`]s.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;

/// Relative tolerance and iteration cap for an iterative linear solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrylovOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

/// Vector-space operations the Krylov recurrences need.
pub trait KrylovVector: Clone {
    fn axpy(&mut self, a: f64, x: &Self);
    fn scale(&mut self, a: f64);
    fn zeros_like(&self) -> Self;

    fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }
}

impl KrylovVector for Field {
    fn axpy(&mut self, a: f64, x: &Self) {
        Field::axpy(self, a, x)
    }

    fn scale(&mut self, a: f64) {
        Field::scale(self, a)
    }

    fn zeros_like(&self) -> Self {
        Field::zeros(*self.grid())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KrylovOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients in the `L^2` quadrature inner product.
///
/// Convergence is measured in the preconditioned norm `sqrt(<r, M r>)`.
pub fn pcg(
    mut apply: impl FnMut(&Field) -> Field,
    mut precond: impl FnMut(&Field) -> Field,
    rhs: &Field,
    x0: Option<Field>,
    opts: &KrylovOptions,
) -> Result<(Field, KrylovOutcome)> {
    let z_b = precond(rhs);
    let b_norm = rhs.dot(&z_b).max(0.0).sqrt();
    let mut x = x0.unwrap_or_else(|| Field::zeros(*rhs.grid()));
    if b_norm == 0.0 {
        return Ok((
            x,
            KrylovOutcome {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = rhs.sub(&apply(&x));
    let mut z = precond(&r);
    let mut rz = r.dot(&z);
    let mut p = z.clone();
    for it in 0..opts.max_iter {
        let rel = rz.max(0.0).sqrt() / b_norm;
        if rel <= opts.tol {
            return Ok((
                x,
                KrylovOutcome {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            return Err(Error::NonConvergence(format!(
                "conjugate gradients lost positivity (p.Ap = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        z = precond(&r);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.scale(beta);
        p.axpy(1.0, &z);
    }
    let rel = rz.max(0.0).sqrt() / b_norm;
    if rel <= opts.tol {
        return Ok((
            x,
            KrylovOutcome {
                iterations: opts.max_iter,
                relative_residual: rel,
            },
        ));
    }
    Err(Error::NonConvergence(format!(
        "conjugate gradients reached {} iterations with relative residual {rel:e}",
        opts.max_iter
    )))
}

/// MINRES for an operator that is self-adjoint in `inner`; no preconditioner.
///
/// Returns once the recurrence residual falls below `opts.tol * |rhs|`.
pub fn minres<V: KrylovVector>(
    apply: impl FnMut(&V) -> V,
    inner: impl Fn(&V, &V) -> f64,
    rhs: &V,
    opts: &KrylovOptions,
) -> Result<(V, KrylovOutcome)> {
    minres_restricted(apply, inner, |_| {}, rhs, opts)
}

/// [`minres`] on an invariant subspace; `restrict` projects each new Krylov vector back onto it.
///
/// Without it the recurrence amplifies roundoff outside the subspace by about `alpha / beta`
/// per step, and the annihilated directions eventually pollute the iteration.
pub fn minres_restricted<V: KrylovVector>(
    mut apply: impl FnMut(&V) -> V,
    inner: impl Fn(&V, &V) -> f64,
    restrict: impl Fn(&mut V),
    rhs: &V,
    opts: &KrylovOptions,
) -> Result<(V, KrylovOutcome)> {
    let mut x = rhs.zeros_like();
    let beta1 = inner(rhs, rhs).max(0.0).sqrt();
    if beta1 == 0.0 {
        return Ok((
            x,
            KrylovOutcome {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r1 = rhs.clone();
    let mut r2 = rhs.clone();
    let mut w = rhs.zeros_like();
    let mut w2 = rhs.zeros_like();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0, 0.0);
    for it in 1..=opts.max_iter {
        let v = r2.scaled(1.0 / beta);
        let mut y = apply(&v);
        if it >= 2 {
            y.axpy(-beta / oldb, &r1);
        }
        let alfa = inner(&v, &y);
        y.axpy(-alfa / beta, &r2);
        restrict(&mut y);
        r1 = std::mem::replace(&mut r2, y);
        oldb = beta;
        beta = inner(&r2, &r2).max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w);
        let mut wn = v;
        wn.axpy(-oldeps, &w1);
        wn.axpy(-delta, &w2);
        wn.scale(1.0 / gamma);
        x.axpy(phi, &wn);
        w = wn;
        let rel = phibar / beta1;
        if rel <= opts.tol || beta == 0.0 {
            return Ok((
                x,
                KrylovOutcome {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
    }
    Err(Error::NonConvergence(format!(
        "MINRES reached {} iterations with relative residual {:e}",
        opts.max_iter,
        phibar / beta1
    )))
}

/// Smallest eigenvalue of an operator that is self-adjoint and positive semidefinite in `inner`,
/// by Lanczos with full reorthogonalization.
///
/// Stops when the Ritz residual of the smallest pair is below `tol` times the largest Ritz value.
pub fn lanczos_smallest<V: KrylovVector>(
    apply: impl FnMut(&V) -> V,
    inner: impl Fn(&V, &V) -> f64,
    start: &V,
    max_steps: usize,
    tol: f64,
) -> Result<(f64, usize)> {
    lanczos_smallest_restricted(apply, inner, |_| {}, start, max_steps, tol)
}

/// [`lanczos_smallest`] on an invariant subspace; see [`minres_restricted`].
pub fn lanczos_smallest_restricted<V: KrylovVector>(
    mut apply: impl FnMut(&V) -> V,
    inner: impl Fn(&V, &V) -> f64,
    restrict: impl Fn(&mut V),
    start: &V,
    max_steps: usize,
    tol: f64,
) -> Result<(f64, usize)> {
    let n0 = inner(start, start).sqrt();
    if !(n0 > 0.0) {
        return Err(Error::InvalidInput("Lanczos start vector is zero".into()));
    }
    let mut basis: Vec<V> = vec![start.scaled(1.0 / n0)];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    for step in 0..max_steps {
        let q = &basis[step];
        let mut r = apply(q);
        let a = inner(q, &r);
        alphas.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &r);
                r.axpy(-c, b);
            }
        }
        restrict(&mut r);
        let beta = inner(&r, &r).max(0.0).sqrt();
        let m = alphas.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imin, &lmin) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let lmax = eig.eigenvalues.iter().copied().fold(f64::MIN, f64::max);
        let ritz_res = beta * eig.eigenvectors[(m - 1, imin)].abs();
        last = lmin;
        if ritz_res <= tol * lmax.abs().max(1e-300) || beta <= 1e-14 * lmax.abs() {
            return Ok((lmin, step + 1));
        }
        betas.push(beta);
        basis.push(r.scaled(1.0 / beta));
    }
    Err(Error::NonConvergence(format!(
        "Lanczos did not resolve the smallest eigenvalue in {max_steps} steps (last estimate {last:e})"
    )))
}
