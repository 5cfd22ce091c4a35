//! Radial ground state of `-Laplacian u + u = f(u)` by Nehari-constrained descent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{
    angular_energy_fraction, free_helmholtz_inverse, radial_extract, symmetrize, Field,
    RadialProfile,
};
use crate::model::EnergyModel;

/// Scale `t > 0` putting `t u` on the Nehari set, and `t u` itself.
///
/// `|u|^2 = sum_i a_i t^(beta_i - 2) int |u|^beta_i` has a unique positive root because the
/// right side increases strictly from 0; for a single power it is explicit.
pub fn nehari_project(model: &EnergyModel, u: &Field) -> Result<(f64, Field)> {
    let norm2 = u.h1_dot(u);
    if !(norm2 > 0.0) {
        return Err(Error::InvalidInput(
            "Nehari projection of the zero field".into(),
        ));
    }
    let terms = model.nonlinearity.terms();
    if terms.is_empty() {
        return Err(Error::Hypothesis(
            "zero nonlinearity has an empty Nehari set".into(),
        ));
    }
    let moments: Vec<f64> = terms
        .iter()
        .map(|p| p.coeff * u.map(|v| v.abs().powf(p.exponent)).integral())
        .collect();
    let t = if let [m] = moments.as_slice() {
        (norm2 / m).powf(1.0 / (terms[0].exponent - 2.0))
    } else {
        let g = |t: f64| {
            terms
                .iter()
                .zip(&moments)
                .map(|(p, m)| m * t.powf(p.exponent - 2.0))
                .sum::<f64>()
                - norm2
        };
        let (mut lo, mut hi) = (1.0, 1.0);
        while g(lo) > 0.0 {
            lo *= 0.5;
        }
        while g(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    Ok((t, u.scaled(t)))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GroundStateOptions {
    /// `H^1` gradient step length.
    pub step: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            step: 1.0,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

/// Least-squares exponential fit of a radial tail.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayFit {
    /// Fitted `a` in `|u| ~ r^{-(N-1)/2} e^{-a r}`.
    pub rate: f64,
    pub intercept: f64,
    /// Largest deviation of a quadratic fit from the linear one over the window, in log units.
    pub curvature: f64,
    pub exponential: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundState {
    #[serde(skip)]
    pub omega: Field,
    #[serde(skip)]
    pub profile: RadialProfile,
    pub energy: f64,
    pub h1_norm_sq: f64,
    pub l2_norm_sq: f64,
    pub gradient_residual: f64,
    pub nehari_residual: f64,
    pub decay: DecayFit,
    pub angular_fraction: f64,
    pub iterations: usize,
}

/// Unit-height Gaussian `exp(-|x|^2 / 2)`.
pub fn default_seed(model: &EnergyModel) -> Field {
    Field::from_fn(model.grid, |x| {
        (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp()
    })
}

/// Iterate `u <- Nehari(|sym(u - step grad I(u))|)` from `seed` until `|grad I(u)| <= tol`.
///
/// Symmetrizing keeps the iterate in the lattice-symmetric sector, where the translation
/// modes cannot be excited by rounding.
pub fn solve_ground_state(
    model: &EnergyModel,
    seed: Option<&Field>,
    opts: &GroundStateOptions,
) -> Result<GroundState> {
    let start = match seed {
        Some(s) => {
            s.check_same_grid(&Field::zeros(model.grid))?;
            s.clone()
        }
        None => default_seed(model),
    };
    let (_, mut u) = nehari_project(model, &symmetrize(&start).map(f64::abs))?;
    let mut iterations = 0;
    let mut grad_norm;
    loop {
        let image = free_helmholtz_inverse(&model.f_field(&u));
        let grad = u.sub(&image);
        grad_norm = grad.h1_norm();
        if !grad_norm.is_finite() {
            return Err(Error::NonFinite("ground-state iterate".into()));
        }
        if grad_norm <= opts.tol {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence(format!(
                "ground state: |grad I| = {grad_norm:e} after {iterations} iterations"
            )));
        }
        let mut next = u.clone();
        next.axpy(-opts.step, &grad);
        u = nehari_project(model, &symmetrize(&next).map(f64::abs))?.1;
        iterations += 1;
    }
    certify(model, u, grad_norm, iterations)
}

fn certify(
    model: &EnergyModel,
    omega: Field,
    grad_norm: f64,
    iterations: usize,
) -> Result<GroundState> {
    if omega.min() * omega.max() < 0.0 {
        return Err(Error::Certificate("ground state changes sign".into()));
    }
    let decay = decay_rate(&omega)?;
    let angular_fraction = angular_energy_fraction(&omega, &[0.0; 3])?;
    Ok(GroundState {
        profile: radial_extract(&omega),
        energy: model.energy_i(&omega),
        h1_norm_sq: omega.h1_dot(&omega),
        l2_norm_sq: omega.dot(&omega),
        gradient_residual: grad_norm,
        nehari_residual: model.nehari_functional(&omega).abs(),
        decay,
        angular_fraction,
        iterations,
        omega,
    })
}

/// Fit `log|u(r)| + (N-1)/2 log r` linearly in `r` over `[L/3, 2L/3]` along the axes.
///
/// The fit is flagged non-exponential when a quadratic fit departs from the line by more than
/// 0.05 in log units somewhere in the window.
pub fn decay_rate(u: &Field) -> Result<DecayFit> {
    let g = u.grid();
    let p = radial_extract(u);
    let (lo, hi) = (g.half_width / 3.0, 2.0 * g.half_width / 3.0);
    let floor = 1e-13 * u.max_abs();
    let mut rs = Vec::new();
    let mut ys = Vec::new();
    for (&r, &v) in p.radii.iter().zip(&p.values) {
        if r >= lo && r <= hi {
            if !(v.abs() > floor) {
                return Err(Error::InvalidInput(format!(
                    "tail value {v:e} at r = {r} is below the noise floor"
                )));
            }
            rs.push(r);
            ys.push(v.abs().ln() + 0.5 * (g.dim as f64 - 1.0) * r.ln());
        }
    }
    if rs.len() < 4 {
        return Err(Error::InvalidInput(
            "too few tail samples for a decay fit".into(),
        ));
    }
    let lin = polyfit(&rs, &ys, 1);
    let quad = polyfit(&rs, &ys, 2);
    let curvature = rs
        .iter()
        .map(|&r| ((quad[0] + quad[1] * r + quad[2] * r * r) - (lin[0] + lin[1] * r)).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        rate: -lin[1],
        intercept: lin[0],
        curvature,
        exponential: curvature <= 0.05,
    })
}

/// Least-squares polynomial coefficients, lowest order first.
fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Vec<f64> {
    let n = degree + 1;
    let shift = x.iter().sum::<f64>() / x.len() as f64;
    let a = nalgebra::DMatrix::from_fn(x.len(), n, |i, j| (x[i] - shift).powi(j as i32));
    let b = nalgebra::DVector::from_column_slice(y);
    let c = a.svd(true, true).solve(&b, 1e-14).expect("SVD solve");
    // Expand the shifted polynomial back into powers of x.
    let mut out = vec![0.0; n];
    for (j, cj) in c.iter().enumerate() {
        for (k, o) in out.iter_mut().enumerate().take(j + 1) {
            *o += cj * binomial(j, k) * (-shift).powi((j - k) as i32);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Energy along the ray `t -> I(t omega)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MountainPass {
    pub level: f64,
    pub ray_max: f64,
    pub ray_argmax: f64,
    /// `I(t omega)` at `t = 10`, negative for a mountain-pass geometry.
    pub far_value: f64,
}

/// Check that the maximum of `I` along the ray through the ground state equals `I(omega)`.
pub fn mountain_pass_value(
    model: &EnergyModel,
    gs: &GroundState,
    tol: f64,
) -> Result<MountainPass> {
    let a = gs.h1_norm_sq;
    let terms = model.nonlinearity.terms();
    let moments: Vec<f64> = terms
        .iter()
        .map(|p| p.coeff * gs.omega.map(|v| v.abs().powf(p.exponent)).integral())
        .collect();
    let ray = |t: f64| {
        0.5 * t * t * a
            - terms
                .iter()
                .zip(&moments)
                .map(|(p, m)| m * t.powf(p.exponent) / p.exponent)
                .sum::<f64>()
    };
    // Golden-section search for the maximum on [0.05, 5].
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.05, 5.0);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    while hi - lo > 1e-12 {
        if ray(c) > ray(d) {
            hi = d;
        } else {
            lo = c;
        }
        c = hi - phi * (hi - lo);
        d = lo + phi * (hi - lo);
    }
    let t = 0.5 * (lo + hi);
    let out = MountainPass {
        level: gs.energy,
        ray_max: ray(t),
        ray_argmax: t,
        far_value: ray(10.0),
    };
    if (out.ray_max - out.level).abs() > tol * out.level.abs().max(1.0) {
        return Err(Error::Certificate(format!(
            "ray maximum {:e} differs from I(omega) = {:e}",
            out.ray_max, out.level
        )));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    /// Relative `H^1` distance of each seeded solve from the reference ground state.
    pub distances: Vec<f64>,
    pub unique: bool,
}

/// Re-solve from `count` random radial seeds (sums of two Gaussians) and compare profiles.
pub fn check_uniqueness(
    model: &EnergyModel,
    gs: &GroundState,
    count: usize,
    seed: u64,
    opts: &GroundStateOptions,
    tol: f64,
) -> Result<UniquenessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = gs.h1_norm_sq.sqrt();
    let mut distances = Vec::with_capacity(count);
    for _ in 0..count {
        let (a1, w1, a2, w2): (f64, f64, f64, f64) = (
            rng.gen_range(0.5..2.0),
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(1.0..5.0),
        );
        let s = Field::from_fn(model.grid, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            a1 * (-r2 / (w1 * w1)).exp() + a2 * (-r2 / (w2 * w2)).exp()
        });
        let other = solve_ground_state(model, Some(&s), opts)?;
        distances.push(other.omega.sub(&gs.omega).h1_norm() / norm);
    }
    let unique = distances.iter().all(|&d| d <= tol);
    Ok(UniquenessReport { distances, unique })
}
