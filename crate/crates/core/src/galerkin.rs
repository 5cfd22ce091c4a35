//! Finite-dimensional radial Galerkin space, the complement correction `pi_k`, and the reduced
//! functionals built from it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::BasisMode;
use crate::eigen::{lobpcg, map_column_pairs, random_block, LobpcgOptions};
use crate::error::{Error, Result};
use crate::field::{free_helmholtz_inverse, gradient, spectral, symmetrize, Field};
use crate::ground_state::decay_rate;
use crate::krylov::KrylovOptions;
use crate::model::EnergyModel;
use crate::projection::{
    inverse_bound, solve_hessian, solve_hessian_scaled, Complement, InverseBound, Subspace,
};

/// Radial fields solving `(-Laplacian + 1) phi = nu W phi` for the `count` smallest `nu`, with
/// `W = |omega| / max|omega|`, normalized in `H^1`.
///
/// These are the leading eigenfields of the compact operator `(-Laplacian + 1)^{-1}(W .)`,
/// which decay like the weight and nest as `count` grows.
pub fn weighted_modes(
    omega: &Field,
    count: usize,
    opts: &LobpcgOptions,
    seed: u64,
) -> Result<(Vec<Field>, Vec<f64>)> {
    let grid = *omega.grid();
    let peak = omega.max_abs();
    if !(peak > 0.0) {
        return Err(Error::InvalidInput(
            "weighted modes of a zero profile".into(),
        ));
    }
    let weight: Vec<f64> = omega.values().iter().map(|v| v.abs() / peak).collect();
    let sp = spectral(&grid);
    let apply =
        |x: &DMatrix<f64>| map_column_pairs(x, |a, b| sp.apply_even_pair(a, b, |k2| 1.0 + k2));
    let pre = |x: &DMatrix<f64>| {
        map_column_pairs(x, |a, b| sp.apply_even_pair(a, b, |k2| 1.0 / (1.0 + k2)))
    };
    let sym = |x: &mut DMatrix<f64>| {
        for mut c in x.column_iter_mut() {
            let f = Field::from_values(grid, c.iter().copied().collect()).expect("finite column");
            c.copy_from_slice(symmetrize(&f).values());
        }
    };
    let nb = count + 4;
    let mut x0 = random_block(grid.len(), nb, seed);
    x0.column_mut(0).copy_from_slice(omega.values());
    let out = lobpcg(apply, pre, Some(&weight), Some(&sym), x0, count, opts)?;
    let fields: Vec<Field> = (0..count)
        .map(|j| {
            let f = Field::from_values(grid, out.vectors.column(j).iter().copied().collect())?;
            // Fix the sign so the value at the origin is nonnegative.
            let s = if f.values()[grid.ravel(&[grid.origin_index(); 3])] < 0.0 {
                -1.0
            } else {
                1.0
            };
            let n = f.h1_norm();
            Ok(f.scaled(s / n))
        })
        .collect::<Result<_>>()?;
    Ok((fields, out.values[..count].to_vec()))
}

/// Radial Galerkin space `X_k = span(E_k) + Y`.
#[derive(Clone, Debug)]
pub struct GalerkinBasis {
    pub k: usize,
    pub mode: BasisMode,
    /// `H^1`-orthonormal basis: the `k` fields of `E_k` followed by the degeneracy fields.
    pub space: Subspace,
    pub degeneracy_dim: usize,
    /// Mollification size used (mollified mode).
    pub mu_k: Option<f64>,
    /// Largest off-diagonal Gram entry of the mollified family before re-orthonormalization.
    pub gram_offdiag: Option<f64>,
    /// Exponential decay rate of each field of `E_k` (eigen mode).
    pub decay_rates: Vec<f64>,
}

impl GalerkinBasis {
    pub fn dim(&self) -> usize {
        self.space.len()
    }

    /// `X_k^perp` inside the radial sector.
    pub fn complement(&self) -> Complement {
        Complement::new(self.space.clone(), true)
    }

    pub fn project(&self, h: &Field) -> Field {
        self.space.project(h)
    }

    /// Radial complement part, `sym(h) - P_k h`.
    pub fn project_perp(&self, h: &Field) -> Field {
        self.space.remove(&symmetrize(h))
    }

    pub fn coeffs(&self, h: &Field) -> Vec<f64> {
        self.space.coeffs(h)
    }

    /// Largest deviation of the `E_k` Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        self.space.orthonormality_error()
    }

    /// Largest `|<e_j, y>|` over basis fields of `E_k` and degeneracy fields `y`.
    pub fn degeneracy_overlap(&self) -> f64 {
        let k = self.k;
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in k..self.dim() {
                worst = worst.max(
                    self.space.vectors()[i]
                        .h1_dot(&self.space.vectors()[j])
                        .abs(),
                );
            }
        }
        worst
    }
}

fn orthogonalize_against(fields: &[Field], y: &[Field]) -> Vec<Field> {
    let ys = Subspace::new(y).unwrap_or_else(|_| Subspace::empty());
    fields.iter().map(|f| ys.remove(f)).collect()
}

/// Eigen-mode basis from the first `k` weighted modes, made orthogonal to `y_basis`.
pub fn eigen_basis(modes: &[Field], y_basis: &[Field], k: usize) -> Result<GalerkinBasis> {
    if modes.len() < k {
        return Err(Error::InvalidInput(format!(
            "{} modes available, {k} requested",
            modes.len()
        )));
    }
    let e = orthogonalize_against(&modes[..k], y_basis);
    let mut all = e.clone();
    all.extend(y_basis.iter().cloned());
    let space = Subspace::new(&all)?;
    let decay_rates = (0..k)
        .map(|j| {
            decay_rate(space.field(j))
                .map(|d| d.rate)
                .unwrap_or(f64::NAN)
        })
        .collect();
    Ok(GalerkinBasis {
        k,
        mode: BasisMode::Eigen,
        space,
        degeneracy_dim: y_basis.len(),
        mu_k: None,
        gram_offdiag: None,
        decay_rates,
    })
}

/// Upper limit on the mollification size for `k` fields.
pub fn mu_cap(k: usize) -> f64 {
    (1.0 / ((2.0 * k as f64).sqrt() + 1.0)).min(1.0 / (4.0 * 2f64.sqrt()))
}

/// Smooth radial cutoff equal to 1 for `r <= inner` and 0 for `r >= inner + width`.
pub fn cutoff(r: f64, inner: f64, width: f64) -> f64 {
    let s = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let t = (r - inner) / width;
    let a = s(1.0 - t);
    let b = s(t);
    a / (a + b)
}

/// Mollified basis: each mode is cut off to a ball so that its `H^1` change is at most
/// `mu_fraction * mu_cap(k)`, then the family is re-orthonormalized.
///
/// The smallest cutoff radius meeting the bound is used. Fails when no radius inside the box
/// meets it, or when the cut family is numerically dependent.
pub fn mollified_basis(
    modes: &[Field],
    y_basis: &[Field],
    k: usize,
    mu_fraction: f64,
) -> Result<GalerkinBasis> {
    if modes.len() < k || k == 0 {
        return Err(Error::InvalidInput(format!(
            "{} modes available, {k} requested",
            modes.len()
        )));
    }
    let grid = *modes[0].grid();
    let target = mu_fraction * mu_cap(k);
    let family = orthogonalize_against(&modes[..k], y_basis);
    let family = Subspace::new(&family)?;
    let width = 2.0;
    let mut chosen = None;
    let mut inner = 0.5;
    while inner + width <= grid.half_width {
        let chi = Field::from_fn(grid, |x| {
            cutoff(x.iter().map(|v| v * v).sum::<f64>().sqrt(), inner, width)
        });
        let cut: Vec<Field> = (0..k).map(|j| family.field(j).mul(&chi)).collect();
        let mu = (0..k)
            .map(|j| cut[j].sub(family.field(j)).h1_norm())
            .fold(0.0, f64::max);
        if mu <= target {
            chosen = Some((cut, mu));
            break;
        }
        inner += 0.25;
    }
    let (cut, mu) = chosen.ok_or_else(|| {
        Error::Certificate(format!(
            "mollification bound {target:e} not reachable inside the box"
        ))
    })?;
    let (space, offdiag) = orthonormalize_checked(&cut, 1e-8)?;
    let mut all: Vec<Field> = (0..space.len()).map(|j| space.field(j).clone()).collect();
    all.extend(y_basis.iter().cloned());
    let space = Subspace::new(&all)?;
    Ok(GalerkinBasis {
        k,
        mode: BasisMode::Mollified,
        space,
        degeneracy_dim: y_basis.len(),
        mu_k: Some(mu),
        gram_offdiag: Some(offdiag),
        decay_rates: Vec::new(),
    })
}

/// Orthonormalize with a dependence detector: fails when the smallest Gram eigenvalue is below
/// `floor`. Returns the span and the largest off-diagonal Gram entry beforehand.
pub fn orthonormalize_checked(fields: &[Field], floor: f64) -> Result<(Subspace, f64)> {
    let n = fields.len();
    let duals: Vec<Field> = fields.iter().map(crate::field::free_helmholtz).collect();
    let g = DMatrix::from_fn(n, n, |i, j| fields[i].dot(&duals[j]));
    let offdiag = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| g[(i, j)].abs())
        .fold(0.0, f64::max);
    let sym = 0.5 * (&g + g.transpose());
    let lmin = sym
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(lmin > floor) {
        return Err(Error::Certificate(format!(
            "linear dependence detected: smallest Gram eigenvalue {lmin:e}"
        )));
    }
    Ok((Subspace::new(fields)?, offdiag))
}

/// Radii and solver controls of the reduction, in absolute units.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReductionSettings {
    pub delta: f64,
    pub tau: f64,
    pub rho: f64,
    pub tol_fix: f64,
    pub fix_max_iter: usize,
    pub tol_crit: f64,
    pub crit_max_iter: usize,
    pub krylov: KrylovOptions,
}

/// Correction `pi_k(v)` with its certificate.
#[derive(Clone, Debug, Serialize)]
pub struct PiSolution {
    #[serde(skip)]
    pub pi: Field,
    pub norm: f64,
    pub residual: f64,
    /// `|w_{n+1} - w_n| / |w_n - w_{n-1}|` per step.
    pub quotients: Vec<f64>,
    pub iterations: usize,
}

/// One application of the contraction `w -> w - L^{-1} P_perp grad I(v + w)`, with `L` the
/// complement Hessian at `v`.
pub fn contraction_step(
    model: &EnergyModel,
    comp: &Complement,
    weight_v: &Field,
    v: &Field,
    w: &Field,
    opts: &KrylovOptions,
) -> Result<Field> {
    let r = comp.project(&model.grad_i(&v.add(w)));
    let (z, _) = solve_hessian(comp, weight_v, &r, opts)?;
    Ok(w.sub(&z))
}

/// Fixed point of the contraction in the radial complement of `X_k`, started at `start` or 0.
pub fn solve_pi_k(
    model: &EnergyModel,
    basis: &GalerkinBasis,
    v: &Field,
    start: Option<&Field>,
    s: &ReductionSettings,
) -> Result<PiSolution> {
    let comp = basis.complement();
    let weight = model.fprime_field(v);
    let mut w = start.map_or_else(|| Field::zeros(*v.grid()), |w0| comp.project(w0));
    let mut quotients = Vec::new();
    let mut prev_step = f64::NAN;
    for it in 0..=s.fix_max_iter {
        let r = comp.project(&model.grad_i(&v.add(&w)));
        let residual = r.h1_norm();
        if residual <= s.tol_fix && (it == 0 || prev_step <= s.tol_fix.max(10.0 * residual)) {
            let norm = w.h1_norm();
            if norm > s.rho {
                return Err(Error::Certificate(format!(
                    "correction norm {norm:e} exceeds the ball radius {:e}",
                    s.rho
                )));
            }
            return Ok(PiSolution {
                pi: w,
                norm,
                residual,
                quotients,
                iterations: it,
            });
        }
        if it == s.fix_max_iter {
            break;
        }
        let (z, _) = solve_hessian(&comp, &weight, &r, &s.krylov)?;
        let step = z.h1_norm();
        if prev_step.is_finite() && prev_step > 0.0 {
            let q = step / prev_step;
            quotients.push(q);
            // Near the roundoff floor the quotient is meaningless.
            if q > 1.0 && step > 1e3 * s.tol_fix {
                return Err(Error::Certificate(format!(
                    "contraction quotient {q:.3} exceeds 1"
                )));
            }
        }
        w.axpy(-1.0, &z);
        prev_step = step;
    }
    Err(Error::NonConvergence(format!(
        "pi_k fixed point not reached in {} steps",
        s.fix_max_iter
    )))
}

/// `D pi_k(v) h` for `h` in `X_k`, from the differentiated complement equation at `v + pi`.
pub fn dpi_k(
    model: &EnergyModel,
    basis: &GalerkinBasis,
    v: &Field,
    pi: &Field,
    h: &Field,
    opts: &KrylovOptions,
) -> Result<Field> {
    let comp = basis.complement();
    let weight = model.fprime_field(&v.add(pi));
    let rhs = free_helmholtz_inverse(&weight.mul(h));
    Ok(solve_hessian_scaled(&comp, &weight, &rhs, rhs.h1_norm(), opts)?.0)
}

/// `g_k(v) = I(v + pi_k(v))` and its gradient `P_k grad I(v + pi_k(v))`.
pub fn reduced_energy(
    model: &EnergyModel,
    basis: &GalerkinBasis,
    v: &Field,
    pi: &Field,
) -> (f64, Field) {
    let lift = v.add(pi);
    (model.energy_i(&lift), basis.project(&model.grad_i(&lift)))
}

/// `I_k(u) = 1/2 |P_perp u|^2 + g_k(P_k u)` and its gradient, for radial `u`.
pub fn script_i(
    model: &EnergyModel,
    basis: &GalerkinBasis,
    u: &Field,
    s: &ReductionSettings,
) -> Result<(f64, Field)> {
    let v = basis.project(u);
    let perp = basis.project_perp(u);
    let pi = solve_pi_k(model, basis, &v, None, s)?;
    let (g, grad_g) = reduced_energy(model, basis, &v, &pi.pi);
    Ok((0.5 * perp.h1_dot(&perp) + g, perp.add(&grad_g)))
}

/// Reduced critical point found by Newton's method on the coefficients in `X_k`.
#[derive(Clone, Debug, Serialize)]
pub struct ReducedCritical {
    #[serde(skip)]
    pub v: Field,
    #[serde(skip)]
    pub pi: Field,
    pub reduced_residual: f64,
    pub lift_residual: f64,
    pub iterations: usize,
    pub distance_from_center: f64,
}

/// Newton iteration for `grad g_k(v) = 0` from `seed`, staying within `delta` of `center`.
pub fn critical_point_reduced(
    model: &EnergyModel,
    basis: &GalerkinBasis,
    seed: &Field,
    center: &Field,
    s: &ReductionSettings,
) -> Result<ReducedCritical> {
    let n = basis.dim();
    let mut c = DVector::from_vec(basis.coeffs(seed));
    let c0 = DVector::from_vec(basis.coeffs(center));
    let mut pi_prev: Option<Field> = None;
    for it in 0..=s.crit_max_iter {
        let v = basis.space.combine(c.as_slice());
        let dist = (&c - &c0).norm();
        if dist > s.delta {
            return Err(Error::Certificate(format!(
                "reduced iterate left the neighborhood: distance {dist:e} > {:e}",
                s.delta
            )));
        }
        let pi = solve_pi_k(model, basis, &v, pi_prev.as_ref(), s)?;
        let lift = v.add(&pi.pi);
        let grad_full = model.grad_i(&lift);
        let g = DVector::from_vec(basis.coeffs(&grad_full));
        let gnorm = g.norm();
        if gnorm <= s.tol_crit {
            return Ok(ReducedCritical {
                lift_residual: grad_full.h1_norm(),
                v,
                pi: pi.pi,
                reduced_residual: gnorm,
                iterations: it,
                distance_from_center: dist,
            });
        }
        if it == s.crit_max_iter {
            break;
        }
        let weight = model.fprime_field(&lift);
        let comp = basis.complement();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            let e = basis.space.field(i);
            let rhs = free_helmholtz_inverse(&weight.mul(e));
            let (d, _) = solve_hessian_scaled(&comp, &weight, &rhs, rhs.h1_norm(), &s.krylov)?;
            let dir = e.add(&d);
            let hd = dir.sub(&free_helmholtz_inverse(&weight.mul(&dir)));
            let col = basis.coeffs(&hd);
            for j in 0..n {
                h[(j, i)] = col[j];
            }
        }
        let h = 0.5 * (&h + h.transpose());
        let step = h
            .lu()
            .solve(&(-&g))
            .ok_or_else(|| Error::NonConvergence("singular reduced Hessian".into()))?;
        c += step;
        pi_prev = Some(pi.pi);
    }
    Err(Error::NonConvergence(format!(
        "reduced Newton did not converge in {} steps",
        s.crit_max_iter
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Selector {
    /// Radial complement of `X_k`.
    XkPerp,
    /// Complement of `X_k` plus the translation modes of the ground state.
    WPerp,
    /// Complement of `X_k` plus the tangent directions of the orbit; equals `WPerp` with one chart.
    EPerp,
}

/// Complement selected by `sel`, with `translations` the ground-state translation modes.
pub fn selected_complement(
    basis: &GalerkinBasis,
    translations: &[Field],
    sel: Selector,
) -> Result<Complement> {
    match sel {
        Selector::XkPerp => Ok(basis.complement()),
        Selector::WPerp | Selector::EPerp => {
            let z = Subspace::new(translations)?;
            Ok(Complement::new(basis.space.join(&z)?, false))
        }
    }
}

/// Smallest singular value of the Hessian of `I` at `v` restricted to the selected complement.
pub fn projected_hessian_inverse_bound(
    model: &EnergyModel,
    basis: &GalerkinBasis,
    translations: &[Field],
    v: &Field,
    sel: Selector,
    seed: u64,
) -> Result<InverseBound> {
    let comp = selected_complement(basis, translations, sel)?;
    let weight = model.fprime_field(v);
    // Smoothed localized noise; a smooth bump would lie almost entirely in a large X_k.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = *v.grid();
    let envelope = Field::from_fn(grid, |x| {
        (-x.iter().map(|t| t * t).sum::<f64>() / 32.0).exp()
    });
    let noise: Vec<f64> = envelope
        .values()
        .iter()
        .map(|e| e * rng.gen_range(-1.0..1.0))
        .collect();
    let start = free_helmholtz_inverse(&Field::from_values(grid, noise)?);
    inverse_bound(&comp, &weight, &start, 300, 1e-8)
}

/// Translation modes `d omega / d x_i`.
pub fn translation_modes(omega: &Field) -> Vec<Field> {
    gradient(omega)
}

/// Normalized radial Gaussian of the given width.
pub fn radial_bump(grid: crate::field::GridSpec, width: f64) -> Field {
    let f = Field::from_fn(grid, |x| {
        (-x.iter().map(|t| t * t).sum::<f64>() / (2.0 * width * width)).exp()
    });
    let n = f.h1_norm();
    f.scaled(1.0 / n)
}

/// `|Phi(w_1) - Phi(w_2)| / |w_1 - w_2|` for the contraction at `count` random triples, with
/// `v` within `delta` of `P_k center` and `w_1, w_2` in the radial complement ball of radius `rho`.
pub fn sample_contraction_quotients(
    model: &EnergyModel,
    basis: &GalerkinBasis,
    center: &Field,
    s: &ReductionSettings,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = *center.grid();
    let comp = basis.complement();
    let pc = basis.project(center);
    let random_perp = |rng: &mut ChaCha8Rng| {
        let mut f = Field::zeros(grid);
        for _ in 0..3 {
            f.axpy(
                rng.gen_range(-1.0..1.0),
                &radial_bump(grid, rng.gen_range(0.7..3.0)),
            );
        }
        let p = comp.project(&f);
        let n = p.h1_norm();
        p.scaled(s.rho * rng.gen_range(0.0..1.0) / n)
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let dir: Vec<f64> = (0..basis.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = basis.space.combine(&dir);
        let v = pc.add(&d.scaled(s.delta * rng.gen_range(0.0..1.0) / d.h1_norm()));
        let w1 = random_perp(&mut rng);
        let w2 = random_perp(&mut rng);
        let weight = model.fprime_field(&v);
        let p1 = contraction_step(model, &comp, &weight, &v, &w1, &s.krylov)?;
        let p2 = contraction_step(model, &comp, &weight, &v, &w2, &s.krylov)?;
        out.push(p1.sub(&p2).h1_norm() / w1.sub(&w2).h1_norm());
    }
    Ok(out)
}

/// Radial test points `omega + s zeta` with `zeta` a normalized Gaussian and `|s| <= scale`.
pub fn test_cloud(omega: &Field, count: usize, scale: f64, seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let zeta = radial_bump(*omega.grid(), rng.gen_range(1.0..3.0));
            omega.add(&zeta.scaled(scale * rng.gen_range(-1.0..1.0)))
        })
        .collect()
}

/// Largest gaps between `I_k` and `I` over a cloud, with the largest correction norm met.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CloudGap {
    pub value_gap: f64,
    pub grad_gap: f64,
    pub sup_pi: f64,
}

pub fn cloud_gap(
    model: &EnergyModel,
    basis: &GalerkinBasis,
    cloud: &[Field],
    s: &ReductionSettings,
) -> Result<CloudGap> {
    let mut g = CloudGap {
        value_gap: 0.0,
        grad_gap: 0.0,
        sup_pi: 0.0,
    };
    for u in cloud {
        let v = basis.project(u);
        let perp = basis.project_perp(u);
        let pi = solve_pi_k(model, basis, &v, None, s)?;
        let (gv, grad_g) = reduced_energy(model, basis, &v, &pi.pi);
        let val = 0.5 * perp.h1_dot(&perp) + gv;
        let grad = perp.add(&grad_g);
        g.value_gap = g.value_gap.max((val - model.energy_i(u)).abs());
        g.grad_gap = g.grad_gap.max(grad.sub(&model.grad_i(u)).h1_norm());
        g.sup_pi = g.sup_pi.max(pi.norm);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::ground_state::{solve_ground_state, GroundStateOptions};
    use crate::model::{Nonlinearity, Potential};

    struct Setup {
        model: EnergyModel,
        omega: Field,
        modes: Vec<Field>,
    }

    fn setup_1d() -> Setup {
        let g = GridSpec::new(1, 16.0, 128).unwrap();
        let model = EnergyModel::new(
            Nonlinearity::cubic(),
            Potential::isotropic(1, 2).unwrap(),
            g,
        )
        .unwrap();
        let omega = solve_ground_state(
            &model,
            None,
            &GroundStateOptions {
                tol: 1e-11,
                ..Default::default()
            },
        )
        .unwrap()
        .omega;
        let (modes, _) = weighted_modes(
            &omega,
            12,
            &LobpcgOptions {
                tol: 1e-9,
                max_iter: 500,
            },
            5,
        )
        .unwrap();
        Setup {
            model,
            omega,
            modes,
        }
    }

    fn settings(omega: &Field) -> ReductionSettings {
        let n = omega.h1_norm();
        ReductionSettings {
            delta: 0.2 * n,
            tau: 0.1 * n,
            rho: 0.1 * n,
            tol_fix: 1e-10,
            fix_max_iter: 100,
            tol_crit: 1e-8,
            crit_max_iter: 30,
            krylov: KrylovOptions {
                tol: 1e-10,
                max_iter: 500,
            },
        }
    }

    #[test]
    fn modes_are_orthonormal_even_and_decaying() {
        let s = setup_1d();
        let b = eigen_basis(&s.modes, &[], 8).unwrap();
        assert!(b.orthonormality_error() < 1e-10);
        for j in 0..8 {
            let f = b.space.field(j);
            assert!(symmetrize(f).sub(f).max_abs() < 1e-12);
            assert!(b.decay_rates[j] >= 0.5, "{:?}", b.decay_rates);
        }
    }

    #[test]
    fn projection_completeness() {
        let s = setup_1d();
        let w2 = s.omega.mul(&s.omega);
        let mut last = (f64::INFINITY, f64::INFINITY);
        for k in [2, 4, 8, 12] {
            let b = eigen_basis(&s.modes, &[], k).unwrap();
            let e1 = b.project_perp(&s.omega).h1_norm();
            let e2 = b.project_perp(&w2).h1_norm();
            assert!(e1 < last.0 && e2 < last.1, "k = {k}: {e1:e} {e2:e}");
            last = (e1, e2);
        }
        assert!(last.0 < 1e-3 * s.omega.h1_norm());
    }

    #[test]
    fn pi_of_projected_ground_state_is_its_complement() {
        let s = setup_1d();
        let st = settings(&s.omega);
        let b = eigen_basis(&s.modes, &[], 6).unwrap();
        let v = b.project(&s.omega);
        let pi = solve_pi_k(&s.model, &b, &v, None, &st).unwrap();
        let perp = b.project_perp(&s.omega);
        assert!(
            pi.pi.sub(&perp).h1_norm() < 1e-8,
            "{:e}",
            pi.pi.sub(&perp).h1_norm()
        );
        assert!(
            pi.quotients.iter().all(|q| *q <= 0.55),
            "{:?}",
            pi.quotients
        );
    }

    #[test]
    fn linear_model_has_trivial_reduction() {
        let s = setup_1d();
        let m = EnergyModel::new(
            Nonlinearity::zero(),
            s.model.potential.clone(),
            s.model.grid,
        )
        .unwrap();
        let st = settings(&s.omega);
        let b = eigen_basis(&s.modes, &[], 4).unwrap();
        let v = b.project(&s.omega);
        let pi = solve_pi_k(&m, &b, &v, None, &st).unwrap();
        assert!(pi.pi.h1_norm() == 0.0 && pi.iterations == 0);
        let d = dpi_k(&m, &b, &v, &pi.pi, b.space.field(1), &st.krylov).unwrap();
        assert_eq!(d.h1_norm(), 0.0);
        let u = s
            .omega
            .add(&b.project_perp(&s.omega.mul(&s.omega)).scaled(0.1));
        let (val, grad) = script_i(&m, &b, &u, &st).unwrap();
        assert!((val - m.energy_i(&u)).abs() < 1e-12 * val.abs());
        assert!(grad.sub(&m.grad_i(&u)).h1_norm() < 1e-10);
        let bound = projected_hessian_inverse_bound(&m, &b, &[], &v, Selector::XkPerp, 1).unwrap();
        assert!((bound.bound - 1.0).abs() < 1e-10);
        let crit = critical_point_reduced(&m, &b, &v.scaled(0.01), &v.scaled(0.01), &st).unwrap();
        assert!(crit.v.h1_norm() < 1e-8);
    }

    #[test]
    fn dpi_matches_finite_differences() {
        let s = setup_1d();
        let st = settings(&s.omega);
        let b = eigen_basis(&s.modes, &[], 4).unwrap();
        let v = b.project(&s.omega).scaled(1.02);
        let h = b.space.field(1).clone();
        let pi = solve_pi_k(&s.model, &b, &v, None, &st).unwrap();
        let d = dpi_k(&s.model, &b, &v, &pi.pi, &h, &st.krylov).unwrap();
        let mut errs = Vec::new();
        for step in [1e-3, 1e-4] {
            let p = solve_pi_k(&s.model, &b, &v.add(&h.scaled(step)), Some(&pi.pi), &st).unwrap();
            errs.push(p.pi.sub(&pi.pi).scaled(1.0 / step).sub(&d).h1_norm());
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio > 8.0 && ratio < 12.0, "{errs:?}");
    }

    #[test]
    fn reduced_newton_recovers_ground_state() {
        let s = setup_1d();
        let st = settings(&s.omega);
        let b = eigen_basis(&s.modes, &[], 6).unwrap();
        let center = b.project(&s.omega);
        let crit =
            critical_point_reduced(&s.model, &b, &center.scaled(1.05), &center, &st).unwrap();
        let lift = crit.v.add(&crit.pi);
        assert!(lift.sub(&s.omega).h1_norm() < 1e-6);
        assert!(crit.lift_residual <= 10.0 * crit.reduced_residual.max(st.tol_fix));
    }

    #[test]
    fn mollified_family_meets_gram_bound() {
        let s = setup_1d();
        let k = 8;
        let b = mollified_basis(&s.modes, &[], k, 0.99).unwrap();
        let mu = b.mu_k.unwrap();
        assert!(mu < mu_cap(k));
        assert!(b.gram_offdiag.unwrap() <= 2.0 * mu + mu * mu);
        assert!(b.orthonormality_error() < 1e-10);
    }

    #[test]
    fn dependence_detector_fires_on_adversarial_family() {
        let s = setup_1d();
        let mut fam: Vec<Field> = s.modes[..4].to_vec();
        // Push the last field onto the first: perturbation of size far beyond the cap.
        fam[3] = s.modes[0].clone();
        assert!(orthonormalize_checked(&fam, 1e-8).is_err());
    }
}
