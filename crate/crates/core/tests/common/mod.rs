//! Independent reference solutions shared by the integration tests.
#![allow(dead_code)]

/// Positive radial solution of `u'' + (N-1)/r u' = u - u^3` found by shooting on `u(0)`.
pub struct ShootingProfile {
    pub dim: usize,
    pub center: f64,
    pub step: f64,
    /// `(r, u(r))` samples up to the point where the trajectory is cut.
    pub samples: Vec<(f64, f64)>,
}

fn rhs(dim: usize, r: f64, u: f64, v: f64) -> (f64, f64) {
    (v, u - u * u * u - (dim as f64 - 1.0) / r * v)
}

/// +1 when the trajectory crosses zero (start too high), -1 when it turns back up.
fn shoot(dim: usize, a: f64, h: f64, r_max: f64, keep: bool) -> (i32, Vec<(f64, f64)>) {
    // Series start off the singular point.
    let r0 = h;
    let c2 = (a - a * a * a) / (2.0 * dim as f64);
    let (mut r, mut u, mut v) = (r0, a + c2 * r0 * r0, 2.0 * c2 * r0);
    let mut out = if keep {
        vec![(0.0, a), (r, u)]
    } else {
        Vec::new()
    };
    while r < r_max {
        let (k1u, k1v) = rhs(dim, r, u, v);
        let (k2u, k2v) = rhs(dim, r + h / 2.0, u + h / 2.0 * k1u, v + h / 2.0 * k1v);
        let (k3u, k3v) = rhs(dim, r + h / 2.0, u + h / 2.0 * k2u, v + h / 2.0 * k2v);
        let (k4u, k4v) = rhs(dim, r + h, u + h * k3u, v + h * k3v);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        r += h;
        if u < 0.0 {
            return (1, out);
        }
        if v > 0.0 {
            return (-1, out);
        }
        if keep {
            out.push((r, u));
        }
    }
    (0, out)
}

impl ShootingProfile {
    /// Bisect on the central value until the bracket is at machine precision.
    pub fn cubic(dim: usize) -> Self {
        let h = 1e-3;
        let r_max = 30.0;
        let (mut lo, mut hi) = (1.0, 6.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            match shoot(dim, mid, h, r_max, false).0 {
                1 => hi = mid,
                _ => lo = mid,
            }
        }
        let (_, samples) = shoot(dim, lo, h, r_max, true);
        // Drop the part of the trajectory where the separating mode has taken over.
        let tail = samples
            .iter()
            .position(|&(_, u)| u < 1e-7)
            .unwrap_or(samples.len());
        ShootingProfile {
            dim,
            center: lo,
            step: h,
            samples: samples[..tail].to_vec(),
        }
    }

    /// `int |u|^2` over `R^N` by the trapezoid rule in `r`.
    pub fn l2_norm_sq(&self) -> f64 {
        let surface = match self.dim {
            1 => 2.0,
            2 => 2.0 * std::f64::consts::PI,
            3 => 4.0 * std::f64::consts::PI,
            _ => panic!("unsupported dimension"),
        };
        let weight = |r: f64| r.powi(self.dim as i32 - 1);
        let mut s = 0.0;
        for w in self.samples.windows(2) {
            let (r0, u0) = w[0];
            let (r1, u1) = w[1];
            s += 0.5 * (r1 - r0) * (u0 * u0 * weight(r0) + u1 * u1 * weight(r1));
        }
        surface * s
    }

    /// Linear interpolation of the profile; zero beyond the cut.
    pub fn eval(&self, r: f64) -> f64 {
        let i = (r / self.step) as usize;
        match (self.samples.get(i), self.samples.get(i + 1)) {
            (Some(&(r0, u0)), Some(&(r1, u1))) => u0 + (u1 - u0) * (r - r0) / (r1 - r0),
            _ => 0.0,
        }
    }
}

/// `sqrt(2) sech(x)`, the one-dimensional cubic soliton.
pub fn sech_soliton(x: f64) -> f64 {
    std::f64::consts::SQRT_2 / x.cosh()
}
