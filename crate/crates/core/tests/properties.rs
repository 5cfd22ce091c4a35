use proptest::prelude::*;

use varred_nls::config::RunConfig;
use varred_nls::field::{
    free_helmholtz, gradient, helmholtz_inverse, symmetrize, translate, Field, GridSpec,
};
use varred_nls::ground_state::nehari_project;
use varred_nls::krylov::KrylovOptions;
use varred_nls::model::{EnergyModel, Nonlinearity, Polynomial, Potential};
use varred_nls::perturbation::gamma;
use varred_nls::projection::{hessian_apply, Complement, Subspace};
use varred_nls::reports::fit_scaling;

fn grid() -> GridSpec {
    GridSpec::new(2, 16.0, 128).unwrap()
}

/// Sum of Gaussians `(amplitude, cx, cy, width)`.
fn bumps(g: GridSpec, params: &[(f64, f64, f64, f64)]) -> Field {
    Field::from_fn(g, |x| {
        params
            .iter()
            .map(|&(a, cx, cy, s)| {
                a * (-((x[0] - cx).powi(2) + (x[1] - cy).powi(2)) / (2.0 * s * s)).exp()
            })
            .sum()
    })
}

fn bump_params() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec(
        (-1.0..1.0f64, -3.0..3.0f64, -3.0..3.0f64, 0.9..2.0f64),
        1..4,
    )
    .prop_filter("nonzero", |v| v.iter().any(|p| p.0.abs() > 0.1))
}

fn model() -> EnergyModel {
    EnergyModel::new(
        Nonlinearity::cubic(),
        Potential::isotropic(2, 2).unwrap(),
        grid(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn translation_round_trip(p in bump_params(), y0 in -3.0..3.0f64, y1 in -3.0..3.0f64) {
        let u = bumps(grid(), &p);
        let back = translate(&translate(&u, &[y0, y1]), &[-y0, -y1]);
        let err = back.sub(&u).h1_norm();
        prop_assert!(err <= 1e-10 * u.h1_norm(), "err {err:e} norm {:e}", u.h1_norm());
    }

    #[test]
    fn h1_product_matches_gradient_quadrature(a in bump_params(), b in bump_params()) {
        let (fa, fb) = (bumps(grid(), &a), bumps(grid(), &b));
        let ga = gradient(&fa);
        let gb = gradient(&fb);
        let quad = ga.iter().zip(&gb).map(|(x, y)| x.dot(y)).sum::<f64>() + fa.dot(&fb);
        prop_assert!((fa.h1_dot(&fb) - quad).abs() <= 1e-8 * fa.h1_norm() * fb.h1_norm());
    }

    #[test]
    fn helmholtz_inverse_is_self_adjoint(a in bump_params(), b in bump_params(), c in 0.0..2.0f64) {
        let g = grid();
        let v = Field::from_fn(g, |x| c * (x[0] * 0.3).sin().powi(2));
        let opts = KrylovOptions { tol: 1e-12, max_iter: 500 };
        let (fa, fb) = (bumps(g, &a), bumps(g, &b));
        let ia = helmholtz_inverse(&fa, Some(&v), &opts).unwrap();
        let ib = helmholtz_inverse(&fb, Some(&v), &opts).unwrap();
        let scale = fa.l2_norm() * fb.l2_norm();
        prop_assert!((ia.dot(&fb) - fa.dot(&ib)).abs() <= 1e-10 * scale);
    }

    #[test]
    fn nonnegative_potential_raises_the_quadratic_form(p in bump_params(), c in 0.0..3.0f64) {
        let g = grid();
        let u = bumps(g, &p);
        let v = Field::from_fn(g, |x| c * (x[0] * x[0] + x[1] * x[1]) / (1.0 + x[0] * x[0]));
        let free = free_helmholtz(&u).dot(&u);
        prop_assert!(free + v.mul(&u).dot(&u) >= free);
    }

    #[test]
    fn energy_along_a_ray_rises_then_falls(p in bump_params()) {
        let m = model();
        let u = bumps(grid(), &p);
        let vals: Vec<f64> = (1..=400).map(|i| m.energy_i(&u.scaled(0.05 * i as f64))).collect();
        let ups: Vec<bool> = vals.windows(2).map(|w| w[1] > w[0]).collect();
        let switches = ups.windows(2).filter(|w| w[0] != w[1]).count();
        prop_assert!(ups[0]);
        prop_assert!(switches <= 1);
        prop_assert!(!ups[ups.len() - 1]);
    }

    #[test]
    fn gradient_matches_central_differences(p in bump_params(), q in bump_params()) {
        let m = model();
        let (u, h) = (bumps(grid(), &p), bumps(grid(), &q));
        let s = 1e-4;
        let fd = (m.energy_i(&u.add(&h.scaled(s))) - m.energy_i(&u.sub(&h.scaled(s)))) / (2.0 * s);
        let exact = m.grad_i(&u).h1_dot(&h);
        prop_assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()) * h.h1_norm());
    }

    #[test]
    fn nehari_projection_lands_on_the_constraint(p in bump_params()) {
        let m = model();
        let (t, v) = nehari_project(&m, &bumps(grid(), &p)).unwrap();
        prop_assert!(t > 0.0);
        prop_assert!(m.nehari_functional(&v).abs() <= 1e-10 * v.h1_dot(&v));
    }

    #[test]
    fn symmetrization_is_an_orthogonal_projection(a in bump_params(), b in bump_params()) {
        let (fa, fb) = (bumps(grid(), &a), bumps(grid(), &b));
        let sa = symmetrize(&fa);
        prop_assert!(symmetrize(&sa).sub(&sa).max_abs() <= 1e-14 * (1.0 + sa.max_abs()));
        let lhs = sa.h1_dot(&fb);
        let rhs = fa.h1_dot(&symmetrize(&fb));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * fa.h1_norm() * fb.h1_norm());
    }

    #[test]
    fn complement_projection_and_hessian_are_symmetric(
        a in bump_params(), b in bump_params(), c in bump_params(),
    ) {
        let g = grid();
        let space = Subspace::new(&[bumps(g, &[(1.0, 0.0, 0.0, 1.0)]), bumps(g, &[(1.0, 1.0, -0.5, 1.5)])]).unwrap();
        let comp = Complement::new(space.clone(), false);
        let (x, y) = (bumps(g, &a), bumps(g, &b));
        let px = comp.project(&x);
        prop_assert!(comp.project(&px).sub(&px).h1_norm() <= 1e-12 * x.h1_norm());
        for e in space.vectors() {
            prop_assert!(px.h1_dot(&e.field).abs() <= 1e-12 * x.h1_norm());
        }
        let weight = bumps(g, &c).map(|v| 3.0 * v * v);
        let zx = comp.lift(&x);
        let zy = comp.lift(&y);
        let hx = hessian_apply(&comp, &weight, &zx);
        let hy = hessian_apply(&comp, &weight, &zy);
        let scale = x.h1_norm() * y.h1_norm();
        prop_assert!((hx.h1_dot(&zy) - zx.h1_dot(&hy)).abs() <= 1e-11 * scale);
    }

    #[test]
    fn power_laws_are_fitted_exactly(slope in 0.5..4.0f64, pre in 0.01..100.0f64) {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025].iter().map(|&e: &f64| (e, pre * e.powf(slope))).collect();
        let fit = fit_scaling(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn configuration_round_trips(seed in 0..=i64::MAX as u64, k in 1usize..64, e0 in 0.05..1.0f64, n in 1usize..5) {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.reduction.k = k;
        cfg.scan.eps = (0..n).map(|i| e0 / 2f64.powi(i as i32)).collect();
        let s = cfg.to_toml_string().unwrap();
        prop_assert_eq!(RunConfig::from_toml_str(&s).unwrap(), cfg);
    }

    #[test]
    fn localization_functional_is_linear_in_the_leading_part(
        p in bump_params(), lambda in 0.05..20.0f64, y0 in -1.0..1.0f64, y1 in -1.0..1.0f64,
    ) {
        let g = bumps(grid(), &p);
        let q = Polynomial::isotropic(2, 2).unwrap();
        let base = gamma(&q, &g, &[y0, y1]);
        let scaled = gamma(&q.scaled(lambda), &g, &[y0, y1]);
        prop_assert!((scaled - lambda * base).abs() <= 1e-12 * lambda * base.abs());
    }
}
