use super::{Nonlinearity, Potential};
use crate::error::{Error, Result};
use crate::field::{free_helmholtz_inverse, Field, GridSpec};

/// Nonlinearity, potential and grid: everything needed to evaluate the limit functional `I`
/// and the perturbed functional `E_eps`.
///
/// Gradients are Riesz representatives in `H^1`, so `<grad(u), h>_{H^1}` is the directional
/// derivative along `h`.
#[derive(Clone, Debug)]
pub struct EnergyModel {
    pub nonlinearity: Nonlinearity,
    pub potential: Potential,
    pub grid: GridSpec,
}

impl EnergyModel {
    pub fn new(nonlinearity: Nonlinearity, potential: Potential, grid: GridSpec) -> Result<Self> {
        if potential.dim() != grid.dim {
            return Err(Error::InvalidInput(format!(
                "potential is {}-dimensional but the grid is {}-dimensional",
                potential.dim(),
                grid.dim
            )));
        }
        Ok(EnergyModel {
            nonlinearity,
            potential,
            grid,
        })
    }

    pub fn f_field(&self, u: &Field) -> Field {
        u.map(|t| self.nonlinearity.f(t))
    }

    pub fn fprime_field(&self, u: &Field) -> Field {
        u.map(|t| self.nonlinearity.fprime(t))
    }

    pub fn primitive_integral(&self, u: &Field) -> f64 {
        u.map(|t| self.nonlinearity.primitive(t)).integral()
    }

    /// `I(u) = 1/2 |u|^2_{H^1} - int F(u)`; on the full space this is also `J`.
    pub fn energy_i(&self, u: &Field) -> f64 {
        0.5 * u.h1_dot(u) - self.primitive_integral(u)
    }

    /// `u - (-Laplacian + 1)^{-1} f(u)`.
    pub fn grad_i(&self, u: &Field) -> Field {
        u.sub(&free_helmholtz_inverse(&self.f_field(u)))
    }

    /// `h - (-Laplacian + 1)^{-1}(f'(u) h)`.
    pub fn hess_i_apply(&self, u: &Field, h: &Field) -> Field {
        h.sub(&free_helmholtz_inverse(&self.fprime_field(u).mul(h)))
    }

    /// `<grad I(u), u> = |u|^2 - int f(u) u`.
    pub fn nehari_functional(&self, u: &Field) -> f64 {
        u.h1_dot(u) - self.f_field(u).dot(u)
    }

    /// `V(eps x)` on the lattice.
    pub fn potential_field(&self, eps: f64) -> Field {
        Field::from_fn(self.grid, |x| {
            self.potential.eval(&scaled(x, eps)[..x.len()])
        })
    }

    /// `d/dx_l [V(eps x)] = eps (d_l V)(eps x)` for each axis.
    pub fn potential_gradient_fields(&self, eps: f64) -> Vec<Field> {
        (0..self.grid.dim)
            .map(|axis| {
                Field::from_fn(self.grid, |x| {
                    eps * self.potential.partial(&scaled(x, eps)[..x.len()], axis)
                })
            })
            .collect()
    }

    /// Functional `E_eps` with its potential sampled once; fails if `1 + V(eps x) <= 0` somewhere.
    pub fn at_eps(&self, eps: f64) -> Result<ScaledEnergy<'_>> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "eps = {eps} must be finite and nonnegative"
            )));
        }
        let v = self.potential_field(eps);
        if let Some(i) = v.values().iter().position(|&p| !(1.0 + p > 0.0)) {
            let x = self.grid.position(i);
            return Err(Error::NonCoercive(format!(
                "1 + V(eps x) = {:e} at x = {:?}, eps = {eps}",
                1.0 + v.values()[i],
                &x[..self.grid.dim]
            )));
        }
        Ok(ScaledEnergy {
            model: self,
            eps,
            v,
        })
    }
}

fn scaled(x: &[f64], eps: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (o, xi) in out.iter_mut().zip(x) {
        *o = eps * xi;
    }
    out
}

/// `E_eps(u) = I(u) + 1/2 int V(eps x) u^2` at a fixed `eps`.
pub struct ScaledEnergy<'a> {
    pub model: &'a EnergyModel,
    pub eps: f64,
    v: Field,
}

impl ScaledEnergy<'_> {
    pub fn potential(&self) -> &Field {
        &self.v
    }

    pub fn energy(&self, u: &Field) -> f64 {
        self.model.energy_i(u) + 0.5 * u.mul(&self.v).dot(u)
    }

    /// `u + (-Laplacian + 1)^{-1}(V(eps x) u - f(u))`.
    pub fn grad(&self, u: &Field) -> Field {
        let src = u.zip_map(&self.v, |t, v| v * t - self.model.nonlinearity.f(t));
        u.add(&free_helmholtz_inverse(&src))
    }

    /// `h + (-Laplacian + 1)^{-1}((V(eps x) - f'(u)) h)`.
    pub fn hess_apply(&self, u: &Field, h: &Field) -> Field {
        h.add(&free_helmholtz_inverse(&self.hess_weight(u).mul(h)))
    }

    /// Pointwise multiplier `V(eps x) - f'(u)` of the Hessian.
    pub fn hess_weight(&self, u: &Field) -> Field {
        self.v
            .zip_map(u, |v, t| v - self.model.nonlinearity.fprime(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Polynomial, RemainderTerm};

    fn model(dim: usize, m: usize) -> EnergyModel {
        let g = GridSpec::new(dim, 16.0, m).unwrap();
        EnergyModel::new(
            Nonlinearity::cubic(),
            Potential::isotropic(dim, 2).unwrap(),
            g,
        )
        .unwrap()
    }

    fn bump(g: GridSpec, c: f64, s: f64) -> Field {
        Field::from_fn(g, |x| {
            let r2: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| (v - 0.3 * i as f64).powi(2))
                .sum();
            c * (-r2 / s).exp()
        })
    }

    #[test]
    fn zero_field() {
        let m = model(2, 64);
        let z = Field::zeros(m.grid);
        assert_eq!(m.energy_i(&z), 0.0);
        assert_eq!(m.grad_i(&z).max_abs(), 0.0);
    }

    #[test]
    fn gradient_matches_central_difference() {
        let m = model(2, 64);
        let u = bump(m.grid, 1.3, 2.0);
        let h = bump(m.grid, 0.7, 5.0).map(|v| v * v - 0.1 * v);
        let g = m.grad_i(&u).h1_dot(&h);
        let e = m.at_eps(0.1).unwrap();
        let ge = e.grad(&u).h1_dot(&h);
        let mut errs = Vec::new();
        for s in [1e-2, 5e-3] {
            let fd =
                (m.energy_i(&u.add(&h.scaled(s))) - m.energy_i(&u.sub(&h.scaled(s)))) / (2.0 * s);
            let fde = (e.energy(&u.add(&h.scaled(s))) - e.energy(&u.sub(&h.scaled(s)))) / (2.0 * s);
            errs.push(((fd - g).abs(), (fde - ge).abs()));
        }
        // Second-order convergence of the central difference.
        assert!(errs[0].0 / errs[1].0 > 3.5, "{errs:?}");
        assert!(errs[0].1 / errs[1].1 > 3.5, "{errs:?}");
    }

    #[test]
    fn hessian_is_h1_symmetric_and_identity_at_zero() {
        let m = model(2, 64);
        let u = bump(m.grid, 1.3, 2.0);
        let a = bump(m.grid, 1.0, 3.0);
        let b = bump(m.grid, 0.5, 1.0).map(|v| v.sin());
        let lhs = m.hess_i_apply(&u, &a).h1_dot(&b);
        let rhs = a.h1_dot(&m.hess_i_apply(&u, &b));
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        let z = Field::zeros(m.grid);
        assert!(m.hess_i_apply(&z, &a).sub(&a).max_abs() < 1e-15);
        let e = m.at_eps(0.2).unwrap();
        let lhs = e.hess_apply(&u, &a).h1_dot(&b);
        let rhs = a.h1_dot(&e.hess_apply(&u, &b));
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn eps_zero_reduces_to_limit_functional() {
        let m = model(2, 64);
        let u = bump(m.grid, 1.0, 2.0);
        let e = m.at_eps(0.0).unwrap();
        assert_eq!(e.energy(&u), m.energy_i(&u));
    }

    #[test]
    fn constant_potential_adds_mass_term() {
        let g = GridSpec::new(2, 16.0, 64).unwrap();
        let v0 = 0.4;
        let lead = Polynomial::isotropic(2, 2).unwrap().scaled(0.0);
        let rem = vec![RemainderTerm {
            coeff: v0,
            powers: vec![0, 0],
            width: None,
        }];
        let m = EnergyModel::new(
            Nonlinearity::cubic(),
            Potential::new(lead, 2, None, rem).unwrap(),
            g,
        )
        .unwrap();
        let u = bump(g, 1.0, 2.0);
        let e = m.at_eps(0.3).unwrap();
        let want = m.energy_i(&u) + 0.5 * v0 * u.dot(&u);
        assert!((e.energy(&u) - want).abs() < 1e-12 * want.abs());
    }

    #[test]
    fn rescaled_potential_approaches_leading_part() {
        let g = GridSpec::new(2, 16.0, 64).unwrap();
        let lead = Polynomial::isotropic(2, 2).unwrap();
        let rem = vec![RemainderTerm {
            coeff: 1.0,
            powers: vec![3, 0],
            width: Some(3.0),
        }];
        let m = EnergyModel::new(
            Nonlinearity::cubic(),
            Potential::new(lead, 2, None, rem).unwrap(),
            g,
        )
        .unwrap();
        let mut errs = Vec::new();
        for eps in [0.1f64, 0.05, 0.025] {
            let v = m.potential_field(eps);
            let mut worst: f64 = 0.0;
            for (i, &val) in v.values().iter().enumerate() {
                let x = g.position(i);
                if x[0].abs() <= 2.0 && x[1].abs() <= 2.0 {
                    worst = worst.max((val / eps.powi(2) - (x[0] * x[0] + x[1] * x[1])).abs());
                }
            }
            errs.push(worst);
        }
        // Remainder of order 3 gives a linear rate in eps.
        assert!(
            errs[0] / errs[1] > 1.9 && errs[1] / errs[2] > 1.9,
            "{errs:?}"
        );
    }

    #[test]
    fn rejects_noncoercive_scaling() {
        let g = GridSpec::new(2, 16.0, 64).unwrap();
        let m = EnergyModel::new(
            Nonlinearity::cubic(),
            Potential::new(
                Polynomial::isotropic(2, 2).unwrap().scaled(-1.0),
                2,
                None,
                Vec::new(),
            )
            .unwrap(),
            g,
        )
        .unwrap();
        assert!(matches!(m.at_eps(0.2), Err(Error::NonCoercive(_))));
    }
}
