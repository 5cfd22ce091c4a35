use std::f64::consts::PI;

use super::Field;
use crate::error::{Error, Result};

/// Fraction of `L^2` mass carried by nonzero angular harmonics about `center`.
///
/// The field is resampled on concentric shells out to `0.9 L`; on each shell the angular mean
/// is the radial part and the angular variance is the remainder. In one dimension the
/// "angular" part is the odd part about `center`.
pub fn angular_energy_fraction(u: &Field, center: &[f64]) -> Result<f64> {
    let g = u.grid();
    if u.max_abs() == 0.0 {
        return Err(Error::InvalidInput(
            "angular fraction of the zero field".into(),
        ));
    }
    let dr = 0.5 * g.spacing();
    let shells = (0.9 * g.half_width / dr).floor() as usize;
    let directions = sphere_rule(g.dim);
    let mut total = 0.0;
    let mut angular = 0.0;
    let mut x = [0.0; 3];
    for j in 0..shells {
        let r = (j as f64 + 0.5) * dr;
        let jac = r.powi(g.dim as i32 - 1);
        let mut mean = 0.0;
        let mut sq = 0.0;
        for (dir, w) in &directions {
            for a in 0..g.dim {
                x[a] = center[a] + r * dir[a];
            }
            let v = u.interpolate(&x[..g.dim]);
            mean += w * v;
            sq += w * v * v;
        }
        total += jac * sq;
        angular += jac * (sq - mean * mean).max(0.0);
    }
    if !(total > 0.0) {
        return Err(Error::InvalidInput(
            "field vanishes on every sampling shell".into(),
        ));
    }
    Ok((angular / total).clamp(0.0, 1.0))
}

/// Unit directions with weights summing to one.
fn sphere_rule(dim: usize) -> Vec<([f64; 3], f64)> {
    match dim {
        1 => vec![([1.0, 0.0, 0.0], 0.5), ([-1.0, 0.0, 0.0], 0.5)],
        2 => {
            let n = 64;
            (0..n)
                .map(|l| {
                    let t = 2.0 * PI * l as f64 / n as f64;
                    ([t.cos(), t.sin(), 0.0], 1.0 / n as f64)
                })
                .collect()
        }
        _ => {
            let (nodes, weights) = gauss_legendre(16);
            let nphi = 32;
            let mut out = Vec::with_capacity(nodes.len() * nphi);
            for (ct, wt) in nodes.iter().zip(&weights) {
                let st = (1.0 - ct * ct).sqrt();
                for l in 0..nphi {
                    let p = 2.0 * PI * l as f64 / nphi as f64;
                    out.push(([st * p.cos(), st * p.sin(), *ct], 0.5 * wt / nphi as f64));
                }
            }
            out
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{partial, GridSpec};

    fn bump(g: GridSpec) -> Field {
        Field::from_fn(g, |x| {
            1.0 / (x.iter().map(|v| v * v).sum::<f64>().sqrt()).cosh()
        })
    }

    #[test]
    fn radial_field_has_no_angular_mass() {
        let g = GridSpec::new(2, 16.0, 128).unwrap();
        let f = angular_energy_fraction(&bump(g), &[0.0, 0.0]).unwrap();
        assert!(f <= 1e-6, "{f}");
    }

    #[test]
    fn dipole_is_almost_purely_angular() {
        let g = GridSpec::new(2, 16.0, 128).unwrap();
        let d = partial(&bump(g), 0);
        assert!(angular_energy_fraction(&d, &[0.0, 0.0]).unwrap() >= 0.99);
    }

    #[test]
    fn equal_mass_mixture_is_half() {
        let g = GridSpec::new(2, 16.0, 128).unwrap();
        let b = bump(g);
        let mut d = partial(&b, 0);
        d.scale(b.l2_norm() / d.l2_norm());
        let f = angular_energy_fraction(&b.add(&d), &[0.0, 0.0]).unwrap();
        assert!((f - 0.5).abs() < 0.05, "{f}");
    }

    #[test]
    fn one_dimensional_parity() {
        let g = GridSpec::new(1, 16.0, 256).unwrap();
        let b = bump(g);
        assert!(angular_energy_fraction(&b, &[0.0]).unwrap() < 1e-10);
        assert!(angular_energy_fraction(&partial(&b, 0), &[0.0]).unwrap() > 0.999);
    }

    #[test]
    fn three_dimensional_radial() {
        let g = GridSpec::new(3, 16.0, 64).unwrap();
        let f = angular_energy_fraction(&bump(g), &[0.0, 0.0, 0.0]).unwrap();
        assert!(f < 1e-5, "{f}");
    }

    #[test]
    fn zero_field_rejected() {
        let g = GridSpec::new(2, 16.0, 32).unwrap();
        assert!(angular_energy_fraction(&Field::zeros(g), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(6)).sum();
        assert!((s - 2.0 / 7.0).abs() < 1e-14);
    }
}
