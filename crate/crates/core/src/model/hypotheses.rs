use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::EnergyModel;

/// Outcome of one hypothesis check; failures carry the violated inequality and a witness.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub witness: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    /// Ambrosetti-Rabinowitz constant used in the check.
    pub mu: f64,
    /// Sign of the Laplacian of the leading part of `V`, 0 when undetermined.
    pub laplacian_sign: f64,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn pass(name: &str, detail: String) -> HypothesisCheck {
    HypothesisCheck {
        name: name.into(),
        passed: true,
        detail,
        witness: None,
    }
}

fn fail(name: &str, detail: String, witness: Vec<f64>) -> HypothesisCheck {
    HypothesisCheck {
        name: name.into(),
        passed: false,
        detail,
        witness: Some(witness),
    }
}

fn sample_points() -> Vec<f64> {
    let mut ts: Vec<f64> = (0..=120)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 120.0))
        .collect();
    let neg: Vec<f64> = ts.iter().map(|t| -t).collect();
    ts.extend(neg);
    ts
}

/// Check the growth, Ambrosetti-Rabinowitz and monotonicity conditions on `f` and the
/// coercivity and leading-order conditions on `V`.
///
/// Coercivity is sampled on the lattice for each scaling in `eps_values`. Named checks:
/// `F1`, `F2`, `F3`, `V0`, `V1`.
pub fn validate_hypotheses(model: &EnergyModel, eps_values: &[f64]) -> HypothesisReport {
    let nl = &model.nonlinearity;
    let dim = model.grid.dim;
    let mut checks = Vec::new();

    let critical = if dim >= 3 {
        2.0 * dim as f64 / (dim as f64 - 2.0)
    } else {
        f64::INFINITY
    };
    let f1 = if nl.terms().is_empty() {
        fail("F1", "nonlinearity has no terms".into(), vec![])
    } else if let Some(t) = nl.terms().iter().find(|t| !(t.coeff > 0.0)) {
        fail(
            "F1",
            format!("coefficient {} is not positive", t.coeff),
            vec![t.coeff, t.exponent],
        )
    } else if let Some(t) = nl
        .terms()
        .iter()
        .find(|t| !(t.exponent > 2.0 && t.exponent < critical))
    {
        fail(
            "F1",
            format!("exponent {} not in (2, {critical})", t.exponent),
            vec![t.exponent],
        )
    } else if nl
        .terms()
        .windows(2)
        .any(|w| w[0].exponent == w[1].exponent)
    {
        fail("F1", "repeated exponent".into(), vec![])
    } else {
        let (p1, p2) = nl.growth_exponents();
        pass(
            "F1",
            format!("exponents in [{p1}, {p2}] within (2, {critical})"),
        )
    };
    checks.push(f1);

    let mu = nl.mu();
    let mut f2 = pass("F2", format!("f(t) t >= {mu} F(t) > 0 on sampled t"));
    if nl.terms().is_empty() {
        f2 = fail("F2", "F vanishes identically".into(), vec![]);
    } else {
        for t in sample_points() {
            let ft = nl.f(t) * t;
            let big_f = nl.primitive(t);
            if !(big_f > 0.0) || ft - mu * big_f < -1e-12 * ft.abs() {
                f2 = fail(
                    "F2",
                    format!("f(t) t = {ft:e} vs mu F(t) = {:e}", mu * big_f),
                    vec![t],
                );
                break;
            }
        }
    }
    checks.push(f2);

    let mut f3 = pass(
        "F3",
        "f(t)/|t| strictly increasing on both half-lines".into(),
    );
    let ts = sample_points();
    let (pos, neg) = ts.split_at(ts.len() / 2);
    'outer: for side in [pos, neg] {
        let mut sorted = side.to_vec();
        sorted.sort_by(f64::total_cmp);
        for w in sorted.windows(2) {
            let a = nl.f(w[0]) / w[0].abs();
            let b = nl.f(w[1]) / w[1].abs();
            if !(b > a) {
                f3 = fail(
                    "F3",
                    format!("f(t)/|t| not increasing between t = {} and {}", w[0], w[1]),
                    vec![w[0], w[1]],
                );
                break 'outer;
            }
        }
    }
    checks.push(f3);

    let mut v0 = pass(
        "V0",
        format!("1 + V(eps x) > 0 on the box for eps in {eps_values:?}"),
    );
    'eps: for &eps in eps_values {
        let v = model.potential_field(eps);
        for (i, &p) in v.values().iter().enumerate() {
            if !(p.is_finite() && 1.0 + p > 0.0) {
                let x = model.grid.position(i);
                let mut w = x[..dim].to_vec();
                w.push(eps);
                v0 = fail(
                    "V0",
                    format!(
                        "1 + V(eps x) = {:e} at x = {:?}, eps = {eps}",
                        1.0 + p,
                        &x[..dim]
                    ),
                    w,
                );
                break 'eps;
            }
        }
    }
    checks.push(v0);

    let pot = &model.potential;
    let n = pot.degree();
    let lead = pot.leading();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let dirs: Vec<Vec<f64>> = (0..256)
        .map(|i| {
            if i < dim {
                (0..dim).map(|a| if a == i { 1.0 } else { 0.0 }).collect()
            } else {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let r = v.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-12);
                v.into_iter().map(|c| c / r).collect()
            }
        })
        .collect();
    let lap = pot.leading_laplacian();
    let mut sigma = 0.0;
    let v1 = if n < 2 || n % 2 != 0 {
        fail(
            "V1",
            format!("leading order {n} is not an even integer >= 2"),
            vec![n as f64],
        )
    } else if lead.is_zero() {
        fail("V1", "leading part vanishes".into(), vec![])
    } else if lead.homogeneous_degree() != Some(n) {
        fail(
            "V1",
            format!("leading part is not homogeneous of degree {n}"),
            vec![],
        )
    } else if let Some(d) = dirs.iter().find(|d| {
        let t = 1.7;
        let scaled: Vec<f64> = d.iter().map(|c| c * t).collect();
        let lhs = lead.eval(&scaled);
        let rhs = t.powi(n as i32) * lead.eval(d);
        (lhs - rhs).abs() > 1e-10 * (1.0 + rhs.abs())
    }) {
        fail("V1", "Q(t x) != t^n Q(x)".into(), d.clone())
    } else if lap.is_zero() {
        fail(
            "V1",
            "Laplacian of the leading part vanishes identically".into(),
            vec![],
        )
    } else {
        let signs: Vec<f64> = dirs.iter().map(|d| pot.laplacian_sign_at(d)).collect();
        let has_pos = signs.iter().position(|&s| s > 0.0);
        let has_neg = signs.iter().position(|&s| s < 0.0);
        match (has_pos, has_neg) {
            (Some(_), Some(j)) => fail(
                "V1",
                "Laplacian of the leading part changes sign".into(),
                dirs[j].clone(),
            ),
            (Some(_), None) => {
                sigma = 1.0;
                pass("V1", format!("Q homogeneous of degree {n}, Laplacian >= 0"))
            }
            (None, Some(_)) => {
                sigma = -1.0;
                pass("V1", format!("Q homogeneous of degree {n}, Laplacian <= 0"))
            }
            (None, None) => fail(
                "V1",
                "Laplacian of the leading part vanishes on samples".into(),
                vec![],
            ),
        }
    };
    let v1 = match pot
        .remainder()
        .iter()
        .find(|t| t.powers.iter().sum::<u32>() <= n)
    {
        Some(t) if v1.passed => fail(
            "V1",
            format!(
                "remainder term of degree {} does not vanish to order > {n}",
                t.powers.iter().sum::<u32>()
            ),
            t.powers.iter().map(|&p| p as f64).collect(),
        ),
        _ => v1,
    };
    checks.push(v1);

    HypothesisReport {
        checks,
        mu,
        laplacian_sign: sigma,
    }
}
