//! Block preconditioned eigensolver for the lowest eigenpairs of `A x = lambda B x`, with `A`
//! symmetric and `B` a positive diagonal weight.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct LobpcgOptions {
    /// Residual tolerance, relative to `max(1, |lambda|)`.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Debug)]
pub struct EigenOutcome {
    pub values: Vec<f64>,
    /// Columns are `B`-orthonormal in the Euclidean sense.
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Pointwise weight times each column.
fn weighted(b: Option<&[f64]>, x: &DMatrix<f64>) -> DMatrix<f64> {
    match b {
        None => x.clone(),
        Some(w) => {
            let mut out = x.clone();
            for mut c in out.column_iter_mut() {
                for (v, wi) in c.iter_mut().zip(w) {
                    *v *= wi;
                }
            }
            out
        }
    }
}

/// Rayleigh-Ritz on the span of `s`: returns coefficient matrix and Ritz values for the `count`
/// smallest pairs. Directions with negligible weight in the Gram matrix are dropped.
fn rayleigh_ritz(
    s: &DMatrix<f64>,
    as_: &DMatrix<f64>,
    bs: &DMatrix<f64>,
    count: usize,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut g = s.tr_mul(bs);
    g = 0.5 * (&g + g.transpose());
    let mut h = s.tr_mul(as_);
    h = 0.5 * (&h + h.transpose());
    let ge = SymmetricEigen::new(g);
    let gmax = ge.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..ge.eigenvalues.len())
        .filter(|&i| ge.eigenvalues[i] > 1e-13 * gmax)
        .collect();
    if keep.len() < count {
        return Err(Error::NonConvergence(format!(
            "eigensolver basis collapsed to rank {} below block size {count}",
            keep.len()
        )));
    }
    let c0 = DMatrix::from_fn(s.ncols(), keep.len(), |i, j| {
        let k = keep[j];
        ge.eigenvectors[(i, k)] / ge.eigenvalues[k].sqrt()
    });
    let mut hr = c0.tr_mul(&h) * &c0;
    hr = 0.5 * (&hr + hr.transpose());
    let he = SymmetricEigen::new(hr);
    let mut order: Vec<usize> = (0..he.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| he.eigenvalues[a].total_cmp(&he.eigenvalues[b]));
    let z = DMatrix::from_fn(keep.len(), count, |i, j| he.eigenvectors[(i, order[j])]);
    let vals = order[..count].iter().map(|&i| he.eigenvalues[i]).collect();
    Ok((c0 * z, vals))
}

/// Locally optimal block preconditioned conjugate gradients.
///
/// `project`, when given, is applied to the start block and every search block; it must be a
/// projector commuting with `A` and `B` (a symmetry sector). Converged once the first `want`
/// residuals are below tolerance.
pub fn lobpcg(
    mut apply_a: impl FnMut(&DMatrix<f64>) -> DMatrix<f64>,
    mut precond: impl FnMut(&DMatrix<f64>) -> DMatrix<f64>,
    weight: Option<&[f64]>,
    project: Option<&dyn Fn(&mut DMatrix<f64>)>,
    mut x: DMatrix<f64>,
    want: usize,
    opts: &LobpcgOptions,
) -> Result<EigenOutcome> {
    let nb = x.ncols();
    if want == 0 || want > nb {
        return Err(Error::InvalidInput(format!(
            "requested {want} eigenpairs from a block of {nb}"
        )));
    }
    if let Some(p) = project {
        p(&mut x);
    }
    let mut ax = apply_a(&x);
    let mut bx = weighted(weight, &x);
    let (c, mut vals) = rayleigh_ritz(&x, &ax, &bx, nb)?;
    x = &x * &c;
    ax = &ax * &c;
    bx = &bx * &c;
    let mut p: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = None;
    let mut residuals = vec![f64::INFINITY; nb];
    for iter in 0..=opts.max_iter {
        let mut r = ax.clone();
        for j in 0..nb {
            let lam = vals[j];
            let mut col = r.column_mut(j);
            col.axpy(-lam, &bx.column(j), 1.0);
            residuals[j] = col.norm() / bx.column(j).norm().max(1e-300) / lam.abs().max(1.0);
        }
        if residuals[..want].iter().all(|&res| res <= opts.tol) {
            return Ok(EigenOutcome {
                values: vals,
                vectors: x,
                residuals,
                iterations: iter,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let active: Vec<usize> = (0..nb).filter(|&j| residuals[j] > opts.tol).collect();
        let ra = DMatrix::from_fn(r.nrows(), active.len(), |i, j| r[(i, active[j])]);
        let mut w = precond(&ra);
        if let Some(pr) = project {
            pr(&mut w);
        }
        // Remove the current block and normalize, which keeps the Gram matrix well conditioned.
        let coef = bx.tr_mul(&w);
        w -= &x * coef;
        for mut c in w.column_iter_mut() {
            let n = c.norm();
            if n > 0.0 {
                c /= n;
            }
        }
        let aw = apply_a(&w);
        let bw = weighted(weight, &w);
        let (s, as_, bs) = match &p {
            Some((pp, ap, bp)) => (
                hcat(&[&x, &w, pp]),
                hcat(&[&ax, &aw, ap]),
                hcat(&[&bx, &bw, bp]),
            ),
            None => (hcat(&[&x, &w]), hcat(&[&ax, &aw]), hcat(&[&bx, &bw])),
        };
        let (c, new_vals) = match rayleigh_ritz(&s, &as_, &bs, nb) {
            Ok(v) => v,
            Err(_) if p.is_some() => {
                // Drop the conjugate directions and retry once.
                p = None;
                let s = hcat(&[&x, &w]);
                let as_ = hcat(&[&ax, &aw]);
                let bs = hcat(&[&bx, &bw]);
                let (c, v) = rayleigh_ritz(&s, &as_, &bs, nb)?;
                x = &s * &c;
                ax = &as_ * &c;
                bx = &bs * &c;
                vals = v;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut cp = c.clone();
        cp.rows_mut(0, nb).fill(0.0);
        let np = (&s * &cp, &as_ * &cp, &bs * &cp);
        x = &s * &c;
        ax = &as_ * &c;
        bx = &bs * &c;
        vals = new_vals;
        p = Some(np);
    }
    Err(Error::NonConvergence(format!(
        "eigensolver stagnated after {} iterations; worst wanted residual {:e}",
        opts.max_iter,
        residuals[..want].iter().copied().fold(0.0, f64::max)
    )))
}

fn hcat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// Seeded Gaussian random block.
pub fn random_block(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Apply `f` to each column of `x`, two columns per call.
pub fn map_column_pairs(
    x: &DMatrix<f64>,
    mut f: impl FnMut(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>),
) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, x.ncols());
    let mut j = 0;
    while j < x.ncols() {
        let a = x.column(j);
        if j + 1 < x.ncols() {
            let b = x.column(j + 1);
            let (ra, rb) = f(a.as_slice(), b.as_slice());
            out.column_mut(j).copy_from(&DVector::from_vec(ra));
            out.column_mut(j + 1).copy_from(&DVector::from_vec(rb));
            j += 2;
        } else {
            let zero = vec![0.0; n];
            let (ra, _) = f(a.as_slice(), &zero);
            out.column_mut(j).copy_from(&DVector::from_vec(ra));
            j += 1;
        }
    }
    out
}
