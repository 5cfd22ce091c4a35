//! The `eps > 0` reduction: translated tangent frames, the correction `w`, the reduced energy
//! `Psi`, the localization functional `Gamma`, and the assembled semiclassical solution.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{free_helmholtz_inverse, gradient, partial, translate, Field};
use crate::galerkin::{dpi_k, solve_pi_k, GalerkinBasis, ReductionSettings};
use crate::model::{EnergyModel, Polynomial};
use crate::projection::{
    inverse_bound, solve_hessian, solve_hessian_scaled, Complement, InverseBound, Subspace,
};

/// Shared data for every `(u, y, eps)` evaluation: the Galerkin space, the ground state and
/// the untranslated frame `X_k + span(d omega / d x_i)`.
pub struct Reducer<'a> {
    pub model: &'a EnergyModel,
    pub basis: &'a GalerkinBasis,
    pub omega: &'a Field,
    pub settings: ReductionSettings,
    base: Subspace,
}

/// Frame translated by `y` and the orthogonal projection onto its complement.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    pub y: Vec<f64>,
    /// Translated `X_k` basis, in the same order as the Galerkin basis.
    pub galerkin: Subspace,
    pub complement: Complement,
}

impl TangentFrame {
    /// `S h`: the component orthogonal to the frame.
    pub fn project_perp(&self, h: &Field) -> Field {
        self.complement.project(h)
    }

    pub fn dim(&self) -> usize {
        self.complement.space.len()
    }

    pub fn gram_condition(&self) -> f64 {
        self.complement.space.gram_condition()
    }

    /// Largest `|<h, t>|` over frame fields `t`.
    pub fn max_overlap(&self, h: &Field) -> f64 {
        self.complement
            .space
            .coeffs(h)
            .iter()
            .fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Correction `w(u, y, eps)` with its certificate.
#[derive(Clone, Debug, Serialize)]
pub struct CorrectionResult {
    #[serde(skip)]
    pub w: Field,
    pub iterations: usize,
    /// `|S grad E_eps(u(. - y) + w)|`.
    pub residual: f64,
    pub quotients: Vec<f64>,
    /// `sup (1 + |x|)^n |w|` for `n = 0, 1, 2`.
    pub weighted_sups: [f64; 3],
}

/// Value and gradient of `Psi(u, y, eps)` in Galerkin coefficients and `y`.
#[derive(Clone, Debug)]
pub struct PsiEval {
    pub value: f64,
    pub grad_u: Vec<f64>,
    pub grad_y: Vec<f64>,
    /// Assembled field `u(. - y) + w`.
    pub lift: Field,
    /// `grad E_eps` at the assembled field.
    pub full_grad: Field,
    pub correction: CorrectionResult,
}

/// Implicit derivatives of `w`: along each translated Galerkin field and along each axis of `y`.
pub struct CorrectionDerivatives {
    /// `D_u w e_j`.
    pub along_u: Vec<Field>,
    /// Part of `D_{y_l} w` driven by the potential; `D_{y_l} w = this - d_l w`.
    pub along_y: Vec<Field>,
}

impl<'a> Reducer<'a> {
    pub fn new(
        model: &'a EnergyModel,
        basis: &'a GalerkinBasis,
        omega: &'a Field,
        settings: ReductionSettings,
    ) -> Result<Self> {
        let z = Subspace::new(&gradient(omega))?;
        let base = basis.space.join(&z)?;
        if !(base.gram_condition() <= 1e6) {
            return Err(Error::Certificate(format!(
                "tangent frame Gram condition {:e} exceeds 1e6",
                base.gram_condition()
            )));
        }
        Ok(Reducer {
            model,
            basis,
            omega,
            settings,
            base,
        })
    }

    pub fn dim(&self) -> usize {
        self.model.grid.dim
    }

    pub fn frame(&self, y: &[f64]) -> Result<TangentFrame> {
        let shifted = |s: &Subspace| {
            if y.iter().all(|v| *v == 0.0) {
                Ok(s.clone())
            } else {
                s.translated(y)
            }
        };
        Ok(TangentFrame {
            y: y.to_vec(),
            galerkin: shifted(&self.basis.space)?,
            complement: Complement::new(shifted(&self.base)?, false),
        })
    }

    /// `f'(u(. - y)) - V(eps x)`: the multiplier of the frozen linearization.
    fn frozen_weight(&self, u_shifted: &Field, eps: f64) -> Result<Field> {
        let se = self.model.at_eps(eps)?;
        Ok(self.model.fprime_field(u_shifted).sub(se.potential()))
    }

    /// `L w = S(w - (-Laplacian + 1)^{-1}((f'(u(. - y)) - V(eps x)) w))` for `w` in the
    /// frame complement.
    pub fn apply_l(&self, frame: &TangentFrame, eps: f64, u: &Field, w: &Field) -> Result<Field> {
        let uy = translate(u, &frame.y);
        let q = self.frozen_weight(&uy, eps)?;
        Ok(frame.project_perp(&w.sub(&free_helmholtz_inverse(&q.mul(w)))))
    }

    /// Smallest singular value of `L` on the frame complement.
    pub fn inverse_bound_l(
        &self,
        frame: &TangentFrame,
        eps: f64,
        u: &Field,
    ) -> Result<InverseBound> {
        let uy = translate(u, &frame.y);
        let q = self.frozen_weight(&uy, eps)?;
        let start = Field::from_fn(self.model.grid, |x| {
            let r2: f64 = x.iter().map(|t| t * t).sum();
            (1.0 + 0.3 * x[0] + 0.1 * x[x.len() - 1] * x[0]) * (-r2 / 6.0).exp()
        });
        inverse_bound(&frame.complement, &q, &start, 200, 1e-8)
    }

    /// Fixed point of `w -> w - L^{-1} S grad E_eps(u(. - y) + w)` in the frame complement.
    pub fn solve_w(
        &self,
        frame: &TangentFrame,
        eps: f64,
        u: &Field,
        start: Option<&Field>,
    ) -> Result<CorrectionResult> {
        let s = &self.settings;
        let se = self.model.at_eps(eps)?;
        let uy = translate(u, &frame.y);
        let q = self.model.fprime_field(&uy).sub(se.potential());
        let mut w = start.map_or_else(
            || Field::zeros(self.model.grid),
            |w0| frame.project_perp(w0),
        );
        let mut quotients = Vec::new();
        let mut prev_step = f64::NAN;
        for it in 0..=s.fix_max_iter {
            let r = frame.project_perp(&se.grad(&uy.add(&w)));
            let residual = r.h1_norm();
            if residual <= s.tol_fix && (it == 0 || prev_step <= s.tol_fix.max(10.0 * residual)) {
                let weighted_sups = weighted_sups(&w);
                return Ok(CorrectionResult {
                    w,
                    iterations: it,
                    residual,
                    quotients,
                    weighted_sups,
                });
            }
            if it == s.fix_max_iter {
                break;
            }
            let (z, _) = solve_hessian(&frame.complement, &q, &r, &s.krylov)?;
            let step = z.h1_norm();
            if prev_step.is_finite() && prev_step > 0.0 {
                let quo = step / prev_step;
                quotients.push(quo);
                if quo > 1.0 && step > 1e3 * s.tol_fix {
                    return Err(Error::Certificate(format!(
                        "correction contraction quotient {quo:.3} exceeds 1 at eps = {eps}"
                    )));
                }
            }
            w.axpy(-1.0, &z);
            prev_step = step;
        }
        Err(Error::NonConvergence(format!(
            "correction not converged in {} steps at eps = {eps}",
            s.fix_max_iter
        )))
    }

    /// `Psi(u, y, eps)` and its gradient, for `u = sum c_j e_j`.
    ///
    /// The frame does not depend on `u`, so the `u`-gradient is the frame component of
    /// `grad E_eps`; in coordinates centered at `y` the frame is fixed and only the potential
    /// moves, which gives `d Psi / d y_l = 1/2 int d_l[V(eps x)] (u(. - y) + w)^2`.
    pub fn eval_psi(
        &self,
        c: &[f64],
        y: &[f64],
        eps: f64,
        warm: Option<&Field>,
    ) -> Result<PsiEval> {
        let frame = self.frame(y)?;
        let u = self.basis.space.combine(c);
        let correction = self.solve_w(&frame, eps, &u, warm)?;
        let se = self.model.at_eps(eps)?;
        let lift = translate(&u, y).add(&correction.w);
        let full_grad = se.grad(&lift);
        let grad_u = frame.galerkin.coeffs(&full_grad);
        let sq = lift.mul(&lift);
        let grad_y = if eps == 0.0 {
            vec![0.0; y.len()]
        } else {
            self.model
                .potential_gradient_fields(eps)
                .iter()
                .map(|g| 0.5 * g.dot(&sq))
                .collect()
        };
        Ok(PsiEval {
            value: se.energy(&lift),
            grad_u,
            grad_y,
            lift,
            full_grad,
            correction,
        })
    }

    /// Implicit derivatives of `w` at the assembled field `lift`.
    pub fn correction_derivatives(
        &self,
        frame: &TangentFrame,
        eps: f64,
        lift: &Field,
        with_y: bool,
    ) -> Result<CorrectionDerivatives> {
        let se = self.model.at_eps(eps)?;
        let q = self.model.fprime_field(lift).sub(se.potential());
        let opts = &self.settings.krylov;
        let along_u = frame
            .galerkin
            .vectors()
            .iter()
            .map(|e| {
                let rhs = free_helmholtz_inverse(&q.mul(&e.field));
                Ok(solve_hessian_scaled(&frame.complement, &q, &rhs, rhs.h1_norm(), opts)?.0)
            })
            .collect::<Result<Vec<_>>>()?;
        let along_y = if with_y && eps > 0.0 {
            self.model
                .potential_gradient_fields(eps)
                .iter()
                .map(|g| {
                    let rhs = free_helmholtz_inverse(&g.mul(lift)).scaled(-1.0);
                    Ok(solve_hessian_scaled(&frame.complement, &q, &rhs, rhs.h1_norm(), opts)?.0)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![Field::zeros(self.model.grid); if with_y { self.dim() } else { 0 }]
        };
        Ok(CorrectionDerivatives { along_u, along_y })
    }

    /// Jacobian of `(grad_u, grad_y)` in `(c, y)`; the `y` block is omitted when `with_y` is false.
    fn jacobian(
        &self,
        frame: &TangentFrame,
        eps: f64,
        ev: &PsiEval,
        d: &CorrectionDerivatives,
        with_y: bool,
    ) -> Result<DMatrix<f64>> {
        let se = self.model.at_eps(eps)?;
        let q = self.model.fprime_field(&ev.lift).sub(se.potential());
        let k = frame.galerkin.len();
        let n = if with_y { k + self.dim() } else { k };
        let es = frame.galerkin.vectors();
        // <Hess h, e>_{H^1} = <h, e>_{H^1} - int q h e.
        let hess_dot = |h: &Field, j: usize| h.dot(&es[j].dual) - q.mul(h).dot(&es[j].field);
        let mut jac = DMatrix::zeros(n, n);
        let dirs_u: Vec<Field> = (0..k).map(|i| es[i].field.add(&d.along_u[i])).collect();
        for i in 0..k {
            for j in 0..k {
                jac[(j, i)] = hess_dot(&dirs_u[i], j);
            }
        }
        if with_y {
            let gfields = self.model.potential_gradient_fields(eps);
            let dlift: Vec<Field> = (0..self.dim())
                .map(|m| d.along_y[m].sub(&partial(&ev.lift, m)))
                .collect();
            for m in 0..self.dim() {
                for j in 0..k {
                    let moving = partial(&es[j].field, m);
                    jac[(j, k + m)] = hess_dot(&dlift[m], j) - ev.full_grad.h1_dot(&moving);
                }
            }
            for l in 0..self.dim() {
                let gl = gfields[l].mul(&ev.lift);
                for i in 0..k {
                    jac[(k + l, i)] = gl.dot(&dirs_u[i]);
                }
                for m in 0..self.dim() {
                    jac[(k + l, k + m)] = gl.dot(&dlift[m]);
                }
            }
        }
        Ok(jac)
    }

    /// Critical point of `Psi(., ., eps)` by Newton's method on `(c, y)`, seeded at `P_k omega`
    /// and `y = 0`. At `eps = 0`, `Psi` does not depend on `y`, which stays at 0.
    pub fn solve_semiclassical(
        &self,
        eps: f64,
        seed: Option<(&[f64], &[f64])>,
        tol_final: f64,
    ) -> Result<SemiclassicalSolution> {
        let s = &self.settings;
        let center = self.basis.coeffs(self.omega);
        let (mut c, mut y) = match seed {
            Some((c0, y0)) => (c0.to_vec(), y0.to_vec()),
            None => (center.clone(), vec![0.0; self.dim()]),
        };
        let with_y = eps > 0.0;
        let k = c.len();
        let mut warm: Option<Field> = None;
        for it in 0..=s.crit_max_iter {
            let dist = c
                .iter()
                .zip(&center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist > s.delta {
                return Err(Error::Certificate(format!(
                    "outer iterate left the neighborhood: distance {dist:e} > {:e}",
                    s.delta
                )));
            }
            let frame = self.frame(&y)?;
            let ev = self.eval_psi(&c, &y, eps, warm.as_ref())?;
            let residual = ev.full_grad.h1_norm();
            let derivs = self.correction_derivatives(&frame, eps, &ev.lift, with_y)?;
            if residual <= s.tol_crit {
                if residual > tol_final {
                    return Err(Error::Certificate(format!(
                        "assembled residual {residual:e} exceeds {tol_final:e}"
                    )));
                }
                return Ok(SemiclassicalSolution {
                    eps,
                    c,
                    y,
                    frame,
                    eval: ev,
                    derivatives: derivs,
                    residual,
                    newton_iterations: it,
                });
            }
            if it == s.crit_max_iter {
                break;
            }
            let jac = self.jacobian(&frame, eps, &ev, &derivs, with_y)?;
            let mut g = ev.grad_u.clone();
            if with_y {
                g.extend_from_slice(&ev.grad_y);
            }
            let step = jac.lu().solve(&(-DVector::from_vec(g))).ok_or_else(|| {
                Error::NonConvergence(format!("singular reduced Jacobian at eps = {eps}"))
            })?;
            for i in 0..k {
                c[i] += step[i];
            }
            if with_y {
                for m in 0..self.dim() {
                    y[m] += step[k + m];
                }
            }
            // Warm start in the coordinates of the next frame.
            let w_prev = ev.correction.w;
            let shift: Vec<f64> = if with_y {
                (0..self.dim()).map(|m| step[k + m]).collect()
            } else {
                vec![0.0; self.dim()]
            };
            warm = Some(if shift.iter().all(|v| *v == 0.0) {
                w_prev
            } else {
                translate(&w_prev, &shift)
            });
        }
        Err(Error::NonConvergence(format!(
            "outer Newton did not converge in {} steps at eps = {eps}",
            s.crit_max_iter
        )))
    }

    /// Stationary point of `Psi(u, ., eps)` for fixed `u` by Newton's method in `y`.
    ///
    /// `sigma = +1` expects a minimum and `sigma = -1` a maximum; the Hessian sign is checked
    /// and the point must lie in the ball of radius `radius / 2`.
    pub fn extremize_y(
        &self,
        c: &[f64],
        eps: f64,
        y0: &[f64],
        sigma: f64,
        radius: f64,
    ) -> Result<YExtremum> {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(
                "Psi does not depend on y at eps = 0".into(),
            ));
        }
        let s = &self.settings;
        let mut y = y0.to_vec();
        let mut warm: Option<Field> = None;
        let n = self.dim();
        for it in 0..=s.crit_max_iter {
            if y.iter().map(|v| v * v).sum::<f64>().sqrt() > 0.5 * radius {
                return Err(Error::Certificate(format!(
                    "y-extremum left the ball |y| <= {:e}",
                    0.5 * radius
                )));
            }
            let frame = self.frame(&y)?;
            let ev = self.eval_psi(c, &y, eps, warm.as_ref())?;
            let derivs = self.correction_derivatives(&frame, eps, &ev.lift, true)?;
            let full = self.jacobian(&frame, eps, &ev, &derivs, true)?;
            let k = c.len();
            let h = full.view((k, k), (n, n)).into_owned();
            let h = 0.5 * (&h + h.transpose());
            let gnorm = ev.grad_y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = ev.lift.l2_norm().powi(2) * eps.powi(self.model.potential.degree() as i32);
            if gnorm <= s.tol_crit * scale.max(1e-300) || gnorm <= 1e-14 {
                let eig = SymmetricEigen::new(h.clone()).eigenvalues;
                let ok = eig.iter().all(|l| sigma * l > 0.0);
                if !ok {
                    return Err(Error::Certificate(format!(
                        "y-Hessian eigenvalues {:?} do not match sign {sigma}",
                        eig.as_slice()
                    )));
                }
                return Ok(YExtremum {
                    y,
                    grad_norm: gnorm,
                    hessian_eigenvalues: eig.iter().copied().collect(),
                    iterations: it,
                    value: ev.value,
                });
            }
            if it == s.crit_max_iter {
                break;
            }
            let step = h
                .lu()
                .solve(&(-DVector::from_vec(ev.grad_y.clone())))
                .ok_or_else(|| Error::NonConvergence("singular y-Hessian".into()))?;
            for m in 0..n {
                y[m] += step[m];
            }
            warm = Some(translate(&ev.correction.w, step.as_slice()));
        }
        Err(Error::NonConvergence(format!(
            "y-extremum not found in {} steps",
            s.crit_max_iter
        )))
    }

    /// Diagnostics at a converged solution: `Gamma`, `eta`, `Lambda` and distances to `omega`.
    /// Distance between `w(u, y, eps)` and `pi_k(u)(. - y)` in value, `y`-derivative and
    /// `u`-derivative, from an evaluation at `(c, y)`.
    pub fn lambda_diagnostic(
        &self,
        c: &[f64],
        y: &[f64],
        eps: f64,
        eval: &PsiEval,
        d: &CorrectionDerivatives,
    ) -> Result<f64> {
        let s = &self.settings;
        let u = self.basis.space.combine(c);
        let pi = solve_pi_k(self.model, self.basis, &u, None, s)?;
        let diff = eval.correction.w.sub(&translate(&pi.pi, y));
        let mut lambda = diff.h1_norm();
        if eps > 0.0 {
            let ydiffs: Vec<Field> = (0..self.dim())
                .map(|m| d.along_y[m].sub(&partial(&diff, m)))
                .collect();
            lambda += top_gram_norm(&ydiffs);
        }
        let udiffs = d
            .along_u
            .iter()
            .zip(self.basis.space.vectors())
            .map(|(a, e)| {
                let dp = dpi_k(self.model, self.basis, &u, &pi.pi, &e.field, &s.krylov)?;
                Ok(a.sub(&translate(&dp, y)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(lambda + top_gram_norm(&udiffs))
    }

    /// [`Self::lambda_diagnostic`] at the fixed reference point `(P_k omega, 0)`.
    pub fn lambda_at_reference(&self, eps: f64) -> Result<f64> {
        let c = self.basis.coeffs(self.omega);
        let y = vec![0.0; self.dim()];
        let eval = self.eval_psi(&c, &y, eps, None)?;
        let frame = self.frame(&y)?;
        let d = self.correction_derivatives(&frame, eps, &eval.lift, true)?;
        self.lambda_diagnostic(&c, &y, eps, &eval, &d)
    }

    pub fn report_row(&self, sol: &SemiclassicalSolution) -> Result<ScanRow> {
        let s = &self.settings;
        let eps = sol.eps;
        let u = self.basis.space.combine(&sol.c);
        let pi = solve_pi_k(self.model, self.basis, &u, None, s)?;
        let limit_energy = self.model.energy_i(&u.add(&pi.pi));
        let profile = u.add(&pi.pi);
        let q = self.model.potential.leading();
        let gamma_value = gamma(q, &profile, &sol.y);
        let nstar = self.model.potential.degree() as i32;
        let eps_n = eps.powi(nstar);
        let eta = sol.eval.value - limit_energy - 0.5 * eps_n * gamma_value;
        let lambda = self.lambda_at_reference(eps)?;
        let lambda_on_solution =
            self.lambda_diagnostic(&sol.c, &sol.y, eps, &sol.eval, &sol.derivatives)?;
        let distance = sol.eval.lift.sub(&translate(self.omega, &sol.y)).h1_norm();
        let (orbit_distance, orbit_shift) = orbit_distance(&sol.eval.lift, self.omega, &sol.y)?;
        let corr = &sol.eval.correction;
        let frozen_sigma_min = self.inverse_bound_l(&sol.frame, eps, &u)?.sigma_min;
        Ok(ScanRow {
            eps,
            psi: sol.eval.value,
            limit_energy,
            gamma: gamma_value,
            eta,
            eta_ratio: if eps > 0.0 { eta / eps_n } else { 0.0 },
            lambda,
            lambda_ratio: if eps > 0.0 { lambda / eps_n } else { 0.0 },
            lambda_on_solution,
            residual: sol.residual,
            correction_residual: corr.residual,
            max_quotient: corr.quotients.iter().copied().fold(0.0, f64::max),
            frozen_sigma_min,
            distance,
            orbit_distance,
            orbit_shift,
            y: sol.y.clone(),
            newton_iterations: sol.newton_iterations,
            weighted_sups: corr.weighted_sups,
        })
    }
}

/// `sup (1 + |x|)^n |w|` for `n = 0, 1, 2`.
pub fn weighted_sups(w: &Field) -> [f64; 3] {
    let g = *w.grid();
    let mut out = [0.0f64; 3];
    for (i, v) in w.values().iter().enumerate() {
        let x = g.position(i);
        let r = 1.0 + x[..g.dim].iter().map(|t| t * t).sum::<f64>().sqrt();
        let a = v.abs();
        out[0] = out[0].max(a);
        out[1] = out[1].max(r * a);
        out[2] = out[2].max(r * r * a);
    }
    out
}

/// Operator norm of `h -> sum h_i d_i` over unit coefficient vectors.
fn top_gram_norm(d: &[Field]) -> f64 {
    if d.is_empty() {
        return 0.0;
    }
    let n = d.len();
    let duals: Vec<Field> = d.iter().map(crate::field::free_helmholtz).collect();
    let g = DMatrix::from_fn(n, n, |i, j| {
        0.5 * (d[i].dot(&duals[j]) + d[j].dot(&duals[i]))
    });
    SymmetricEigen::new(g)
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .sqrt()
}

/// Converged outer solve.
pub struct SemiclassicalSolution {
    pub eps: f64,
    pub c: Vec<f64>,
    pub y: Vec<f64>,
    pub frame: TangentFrame,
    pub eval: PsiEval,
    pub derivatives: CorrectionDerivatives,
    /// `|grad E_eps|` of the assembled field.
    pub residual: f64,
    pub newton_iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct YExtremum {
    pub y: Vec<f64>,
    pub grad_norm: f64,
    pub hessian_eigenvalues: Vec<f64>,
    pub iterations: usize,
    pub value: f64,
}

/// One row of the semiclassical scan.
#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub eps: f64,
    pub psi: f64,
    /// `I(u + pi_k(u))` at the solution's `u`.
    pub limit_energy: f64,
    pub gamma: f64,
    pub eta: f64,
    pub eta_ratio: f64,
    /// Correction-distance diagnostic at the reference point `(P_k omega, 0)`.
    pub lambda: f64,
    pub lambda_ratio: f64,
    /// The same diagnostic evaluated at the solution's own `(c, y)`.
    pub lambda_on_solution: f64,
    pub residual: f64,
    pub correction_residual: f64,
    pub max_quotient: f64,
    /// Smallest singular value of the frozen operator on the frame complement.
    pub frozen_sigma_min: f64,
    /// `|u_eps - omega(. - y_eps)|`.
    pub distance: f64,
    /// `min_z |u_eps - omega(. - z)|`.
    pub orbit_distance: f64,
    pub orbit_shift: Vec<f64>,
    pub y: Vec<f64>,
    pub newton_iterations: usize,
    pub weighted_sups: [f64; 3],
}

/// `min_z |u - omega(. - z)|_{H^1}` by Newton's method on the cross-correlation, from `z0`.
pub fn orbit_distance(u: &Field, omega: &Field, z0: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = u.grid().dim;
    let du = crate::field::free_helmholtz(u);
    let mut z = z0.to_vec();
    for _ in 0..50 {
        let wz = translate(omega, &z);
        // C(z) = <u, omega(. - z)>; dC/dz_l = -<du, d_l omega_z>.
        let grads = gradient(&wz);
        let g: Vec<f64> = grads.iter().map(|d| -du.dot(d)).collect();
        let h = DMatrix::from_fn(n, n, |l, m| du.dot(&partial(&grads[l], m)));
        let step = match h.lu().solve(&(-DVector::from_vec(g.clone()))) {
            Some(s) => s,
            None => break,
        };
        let size = step.norm();
        for m in 0..n {
            z[m] += step[m];
        }
        if size < 1e-12 {
            break;
        }
    }
    Ok((u.sub(&translate(omega, &z)).h1_norm(), z))
}

/// `Gamma(y) = int Q(x + y) g^2` for a profile `g = u + pi_k(u)`.
pub fn gamma(q: &Polynomial, g: &Field, y: &[f64]) -> f64 {
    let grid = *g.grid();
    let qy = Field::from_fn(grid, |x| {
        let mut p = [0.0; 3];
        for a in 0..x.len() {
            p[a] = x[a] + y[a];
        }
        q.eval(&p[..x.len()])
    });
    qy.mul(g).dot(g)
}

/// `d Gamma / d y` from the exact polynomial gradient.
pub fn gamma_gradient(q: &Polynomial, g: &Field, y: &[f64]) -> Vec<f64> {
    (0..g.grid().dim)
        .map(|a| gamma(&q.partial(a), g, y))
        .collect()
}

/// Hessian of `Gamma` at `y = 0` three ways, with its extreme eigenvalues.
#[derive(Clone, Debug, Serialize)]
pub struct LocalizationData {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Second differences of `Gamma` in `y`.
    pub hessian_fd: Vec<Vec<f64>>,
    /// `-int d_j Q d_i(g^2)`, integrated by parts once.
    pub hessian_grad_q: Vec<Vec<f64>>,
    /// `(1/N) int Laplacian(Q) g^2` times the identity.
    pub hessian_lap_q: Vec<Vec<f64>>,
    /// Largest pairwise relative difference of the three forms.
    pub agreement: f64,
    /// Smallest eigenvalue of the finite-difference Hessian.
    pub a_k: f64,
    pub largest_eigenvalue: f64,
    /// Sign of `int Laplacian(Q) g^2`.
    pub sigma: f64,
    /// Share of `int |Q| g^2` from `|x| > 0.9 L`.
    pub tail_fraction: f64,
}

/// Localization data for profile `g` and leading part `q`.
///
/// Fails when the weight `|Q| g^2` is not negligible near the box edge.
pub fn localization(q: &Polynomial, g: &Field) -> Result<LocalizationData> {
    let grid = *g.grid();
    let n = grid.dim;
    let sq = g.mul(g);
    let qf = Field::from_fn(grid, |x| q.eval(x).abs());
    let edge = 0.9 * grid.half_width;
    let far = Field::from_fn(grid, |x| {
        if x.iter().map(|t| t * t).sum::<f64>().sqrt() > edge {
            1.0
        } else {
            0.0
        }
    });
    let total = qf.dot(&sq);
    let tail_fraction = if total > 0.0 {
        qf.mul(&far).dot(&sq) / total
    } else {
        0.0
    };
    if tail_fraction > 1e-6 {
        return Err(Error::Certificate(format!(
            "localization weight not resolved in the box: tail fraction {tail_fraction:e}"
        )));
    }
    let zero = vec![0.0; n];
    let value = gamma(q, g, &zero);
    let grad0 = gamma_gradient(q, g, &zero);
    // Five-point differences are exact for polynomials up to degree 5.
    let h = 0.25;
    let at = |d: &[(usize, f64)]| {
        let mut y = zero.clone();
        for &(a, v) in d {
            y[a] += v;
        }
        gamma(q, g, &y)
    };
    let mut fd = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            fd[i][j] = if i == j {
                (-at(&[(i, 2.0 * h)]) + 16.0 * at(&[(i, h)]) - 30.0 * value + 16.0 * at(&[(i, -h)])
                    - at(&[(i, -2.0 * h)]))
                    / (12.0 * h * h)
            } else {
                (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)])
                    + at(&[(i, -h), (j, -h)]))
                    / (4.0 * h * h)
            };
        }
    }
    let dsq = gradient(&sq);
    let dq: Vec<Field> = (0..n)
        .map(|a| Field::from_fn(grid, |x| q.partial(a).eval(x)))
        .collect();
    let mut gq = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            gq[i][j] = -0.5 * (dq[j].dot(&dsq[i]) + dq[i].dot(&dsq[j]));
        }
    }
    let lap = q.laplacian();
    let lap_int = Field::from_fn(grid, |x| lap.eval(x)).dot(&sq);
    let lq: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { lap_int / n as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    let scale = fd
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let diff = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
            / scale
    };
    let agreement = diff(&fd, &gq).max(diff(&fd, &lq)).max(diff(&gq, &lq));
    let eig =
        SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| 0.5 * (fd[i][j] + fd[j][i]))).eigenvalues;
    Ok(LocalizationData {
        value,
        gradient: grad0,
        hessian_fd: fd,
        hessian_grad_q: gq,
        hessian_lap_q: lq,
        agreement,
        a_k: eig.iter().copied().fold(f64::INFINITY, f64::min),
        largest_eigenvalue: eig.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        sigma: lap_int.signum(),
        tail_fraction,
    })
}

/// Minimizer (`sigma = +1`) or maximizer (`sigma = -1`) of `Gamma(g; .)` by Newton's method.
pub fn gamma_extremum(
    q: &Polynomial,
    g: &Field,
    sigma: f64,
    y0: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let n = g.grid().dim;
    let mut y = y0.to_vec();
    let hq: Vec<Vec<Polynomial>> = (0..n)
        .map(|i| (0..n).map(|j| q.partial(i).partial(j)).collect())
        .collect();
    for _ in 0..100 {
        let grad = gamma_gradient(q, g, &y);
        let h = DMatrix::from_fn(n, n, |i, j| gamma(&hq[i][j], g, &y));
        let eig = SymmetricEigen::new(h.clone()).eigenvalues;
        if !eig.iter().all(|l| sigma * l > 0.0) {
            return Err(Error::Certificate(format!(
                "Gamma Hessian {:?} has the wrong sign for sigma = {sigma}",
                eig.as_slice()
            )));
        }
        let step = h
            .lu()
            .solve(&(-DVector::from_vec(grad)))
            .ok_or_else(|| Error::NonConvergence("singular Gamma Hessian".into()))?;
        for a in 0..n {
            y[a] += step[a];
        }
        if step.norm() <= tol {
            return Ok(y);
        }
    }
    Err(Error::NonConvergence("Gamma extremum not found".into()))
}
